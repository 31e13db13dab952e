//! The fixed set of 21 string similarity functions.
//!
//! Every function maps a pair of strings into `[0, 1]`. Inputs are trimmed
//! and lowercased first; two strings that are equal after that step always
//! score 1, and a missing value on either side always scores 0.

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityFunction {
    ExactEquality,
    Levenshtein,
    Jaro,
    JaroWinkler,
    SmithWaterman,
    NeedlemanWunsch,
    LongestCommonSubstring,
    Prefix,
    Suffix,
    TokenJaccard,
    TokenDice,
    TokenOverlap,
    TokenCosine,
    BigramJaccard,
    TrigramJaccard,
    BigramDice,
    TrigramCosine,
    MongeElkan,
    TokenContainment,
    NumericAware,
    SoundexEquality,
}

use SimilarityFunction::*;

impl SimilarityFunction {
    /// All functions in feature-vector order.
    pub const ALL: [SimilarityFunction; 21] = [
        ExactEquality,
        Levenshtein,
        Jaro,
        JaroWinkler,
        SmithWaterman,
        NeedlemanWunsch,
        LongestCommonSubstring,
        Prefix,
        Suffix,
        TokenJaccard,
        TokenDice,
        TokenOverlap,
        TokenCosine,
        BigramJaccard,
        TrigramJaccard,
        BigramDice,
        TrigramCosine,
        MongeElkan,
        TokenContainment,
        NumericAware,
        SoundexEquality,
    ];

    pub const COUNT: usize = 21;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ExactEquality => "Equal",
            Levenshtein => "LevenshteinSim",
            Jaro => "JaroSim",
            JaroWinkler => "JaroWinklerSim",
            SmithWaterman => "SmithWatermanSim",
            NeedlemanWunsch => "NeedlemanWunschSim",
            LongestCommonSubstring => "LongestCommonSubstringSim",
            Prefix => "PrefixSim",
            Suffix => "SuffixSim",
            TokenJaccard => "JaccardSim",
            TokenDice => "DiceSim",
            TokenOverlap => "OverlapSim",
            TokenCosine => "CosineSim",
            BigramJaccard => "Bigram JaccardSim",
            TrigramJaccard => "Trigram JaccardSim",
            BigramDice => "Bigram DiceSim",
            TrigramCosine => "Trigram CosineSim",
            MongeElkan => "MongeElkanSim",
            TokenContainment => "ContainmentSim",
            NumericAware => "NumericSim",
            SoundexEquality => "SoundexEqual",
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, MongeElkan | TokenContainment)
    }
}

impl std::fmt::Display for SimilarityFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scores `a` against `b`. Missing values score 0.
pub fn similarity(function: SimilarityFunction, a: Option<&str>, b: Option<&str>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => PreparedValue::new(a).score(function, &PreparedValue::new(b)),
        _ => 0.0,
    }
}

/// A value normalised once so all 21 functions can reuse it.
#[derive(Debug, Clone)]
pub struct PreparedValue {
    text: String,
    chars: Vec<char>,
    tokens: Vec<String>,
}

impl PreparedValue {
    pub fn new(raw: &str) -> Self {
        let text = raw.trim().to_lowercase();
        let chars = text.chars().collect();
        let mut tokens: Vec<String> = tokenize(&text).collect();
        tokens.sort_unstable();
        tokens.dedup();
        Self { text, chars, tokens }
    }

    pub fn score(&self, function: SimilarityFunction, other: &PreparedValue) -> f64 {
        if self.text == other.text {
            return 1.0;
        }
        let (a, b) = (&self.chars[..], &other.chars[..]);
        let value = match function {
            ExactEquality => 0.0,
            Levenshtein => levenshtein_similarity(a, b),
            Jaro => jaro(a, b),
            JaroWinkler => jaro_winkler(a, b),
            SmithWaterman => smith_waterman(a, b),
            NeedlemanWunsch => needleman_wunsch(a, b),
            LongestCommonSubstring => longest_common_substring(a, b),
            Prefix => prefix(a, b),
            Suffix => suffix(a, b),
            TokenJaccard => set_jaccard(&self.tokens, &other.tokens),
            TokenDice => set_dice(&self.tokens, &other.tokens),
            TokenOverlap => set_overlap(&self.tokens, &other.tokens),
            TokenCosine => set_cosine(&self.tokens, &other.tokens),
            BigramJaccard => set_jaccard(&qgrams(a, 2), &qgrams(b, 2)),
            TrigramJaccard => set_jaccard(&qgrams(a, 3), &qgrams(b, 3)),
            BigramDice => set_dice(&qgrams(a, 2), &qgrams(b, 2)),
            TrigramCosine => set_cosine(&qgrams(a, 3), &qgrams(b, 3)),
            MongeElkan => monge_elkan(&self.tokens, &other.tokens),
            TokenContainment => containment(&self.tokens, &other.tokens),
            NumericAware => match (parse_number(&self.text), parse_number(&other.text)) {
                (Some(x), Some(y)) => numeric_similarity(x, y),
                _ => set_jaccard(&self.tokens, &other.tokens),
            },
            SoundexEquality => {
                let (sa, sb) = (soundex(&self.text), soundex(&other.text));
                (!sa.is_empty() && sa == sb) as u8 as f64
            }
        };
        value.clamp(0.0, 1.0)
    }
}

fn levenshtein_similarity(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

pub(crate) fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + (ca != cb) as usize;
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub(crate) fn jaro(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_match = vec![false; a.len()];
    let mut b_match = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_match[j] && b[j] == *ca {
                a_match[i] = true;
                b_match[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_match).filter(|(_, m)| **m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_match).filter(|(_, m)| **m).map(|(c, _)| c);
    let transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count() / 2;
    let m = matches as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - transpositions as f64) / m) / 3.0
}

/// Jaro-Winkler: scaling factor 0.1, common prefix capped at 4, prefix
/// boost applied only above a Jaro score of 0.7.
pub(crate) fn jaro_winkler(a: &[char], b: &[char]) -> f64 {
    let j = jaro(a, b);
    if j <= 0.7 {
        return j;
    }
    let l = a.iter().zip(b).take(4).take_while(|(x, y)| x == y).count();
    j + l as f64 * 0.1 * (1.0 - j)
}

/// Local alignment score (match 1, mismatch -2, gap -0.5) over the shorter length.
fn smith_waterman(a: &[char], b: &[char]) -> f64 {
    let shortest = a.len().min(b.len());
    if shortest == 0 {
        return 0.0;
    }
    let mut prev = vec![0.0f64; b.len() + 1];
    let mut cur = vec![0.0f64; b.len() + 1];
    let mut best = 0.0f64;
    for ca in a {
        cur[0] = 0.0;
        for (j, cb) in b.iter().enumerate() {
            let diag = prev[j] + if ca == cb { 1.0 } else { -2.0 };
            let v = diag.max(prev[j + 1] - 0.5).max(cur[j] - 0.5).max(0.0);
            cur[j + 1] = v;
            best = best.max(v);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best / shortest as f64
}

/// Global alignment cost (mismatch 1, gap 2) turned into a similarity.
fn needleman_wunsch(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| 2.0 * j as f64).collect();
    let mut cur = vec![0.0f64; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = 2.0 * (i + 1) as f64;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0.0 } else { 1.0 };
            cur[j + 1] = sub.min(prev[j + 1] + 2.0).min(cur[j] + 2.0);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    1.0 - prev[b.len()] / (2.0 * longest as f64)
}

fn longest_common_substring(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for ca in a {
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    2.0 * best as f64 / (a.len() + b.len()) as f64
}

fn prefix(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    a.iter().zip(b).take_while(|(x, y)| x == y).count() as f64 / longest as f64
}

fn suffix(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count() as f64 / longest as f64
}

fn qgrams(chars: &[char], q: usize) -> Vec<String> {
    if chars.is_empty() {
        return Vec::new();
    }
    let mut grams: Vec<String> = if chars.len() < q {
        vec![chars.iter().collect()]
    } else {
        chars.windows(q).map(|w| w.iter().collect()).collect()
    };
    grams.sort_unstable();
    grams.dedup();
    grams
}

fn intersection<T: Ord>(a: &[T], b: &[T]) -> usize {
    crate::corpus::sorted_intersection_len(a, b)
}

fn set_jaccard<T: Ord>(a: &[T], b: &[T]) -> f64 {
    let inter = intersection(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn set_dice<T: Ord>(a: &[T], b: &[T]) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        0.0
    } else {
        2.0 * intersection(a, b) as f64 / total as f64
    }
}

fn set_overlap<T: Ord>(a: &[T], b: &[T]) -> f64 {
    let smallest = a.len().min(b.len());
    if smallest == 0 {
        0.0
    } else {
        intersection(a, b) as f64 / smallest as f64
    }
}

fn set_cosine<T: Ord>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() || b.is_empty() {
        0.0
    } else {
        intersection(a, b) as f64 / ((a.len() * b.len()) as f64).sqrt()
    }
}

fn containment<T: Ord>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        intersection(a, b) as f64 / a.len() as f64
    }
}

fn monge_elkan(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let b_chars: Vec<Vec<char>> = b.iter().map(|t| t.chars().collect()).collect();
    let total: f64 = a
        .iter()
        .map(|t| {
            let tc: Vec<char> = t.chars().collect();
            b_chars.iter().map(|u| jaro_winkler(&tc, u)).fold(0.0, f64::max)
        })
        .sum();
    total / a.len() as f64
}

fn parse_number(text: &str) -> Option<f64> {
    let cleaned: String = text.chars().filter(|c| !matches!(c, '$' | ',' | ' ')).collect();
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn numeric_similarity(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        1.0
    } else {
        1.0 - (x - y).abs() / scale
    }
}

/// American Soundex code of the ASCII letters in `text`, or "" when there are none.
pub(crate) fn soundex(text: &str) -> String {
    fn digit(c: char) -> Option<char> {
        match c {
            'b' | 'f' | 'p' | 'v' => Some('1'),
            'c' | 'g' | 'j' | 'k' | 'q' | 's' | 'x' | 'z' => Some('2'),
            'd' | 't' => Some('3'),
            'l' => Some('4'),
            'm' | 'n' => Some('5'),
            'r' => Some('6'),
            _ => None,
        }
    }
    let letters: Vec<char> = text
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let Some(&first) = letters.first() else {
        return String::new();
    };
    let mut code = String::with_capacity(4);
    code.push(first.to_ascii_uppercase());
    let mut last = digit(first);
    for &c in &letters[1..] {
        let d = digit(c);
        if let Some(d) = d {
            if Some(d) != last {
                code.push(d);
                if code.len() == 4 {
                    break;
                }
            }
        }
        // 'h' and 'w' do not separate equal codes; vowels do.
        if !matches!(c, 'h' | 'w') {
            last = d;
        }
    }
    while code.len() < 4 {
        code.push('0');
    }
    code
}
