use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use emal::{Error, Label};

use crate::types::ErrorBody;

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    /// A pair already carries a different answer, which stands.
    LabelConflict { pair_id: usize, existing: Label, submitted: Label },
    /// The session is not in a state that accepts the request.
    State(String),
    /// Ids outside the pending batch.
    Unprocessable(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::LabelConflict {
                pair_id,
                existing,
                submitted,
            } => ApiError::LabelConflict {
                pair_id,
                existing,
                submitted,
            },
            Error::UnknownPair(_) => ApiError::Unprocessable(format!("{e}; not in the pending batch")),
            Error::Session(_) => ApiError::State(e.to_string()),
            Error::InvalidArgument(_) | Error::Incompatible(_) | Error::SingleClass { .. } => {
                ApiError::BadRequest(e.to_string())
            }
            _ => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, plain(m)),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, plain(m)),
            ApiError::State(m) => (StatusCode::CONFLICT, plain(m)),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, plain(m)),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, plain(m)),
            ApiError::LabelConflict {
                pair_id,
                existing,
                submitted,
            } => (
                StatusCode::CONFLICT,
                ErrorBody {
                    error: format!("pair {pair_id} is already labeled {existing}; {submitted} rejected"),
                    pair_id: Some(pair_id),
                    existing: Some(existing),
                },
            ),
        };
        (status, Json(body)).into_response()
    }
}

fn plain(error: String) -> ErrorBody {
    ErrorBody {
        error,
        pair_id: None,
        existing: None,
    }
}
