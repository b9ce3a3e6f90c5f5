//! HTTP transport over [`Service::handle`]. Every route is handled by the
//! service itself, so this layer only translates requests and responses.

use std::str::FromStr;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method as HttpMethod, Response, StatusCode, Uri};
use axum::Router;
use serde_json::Value;

use crowdwrite_core::service::{ApiError, ApiRequest, Method, Service};

pub fn router(service: Arc<Service>) -> Router {
    Router::new().fallback(dispatch).with_state(service)
}

async fn dispatch(
    State(service): State<Arc<Service>>,
    method: HttpMethod,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> Response<Body> {
    if method == HttpMethod::OPTIONS {
        return respond(StatusCode::NO_CONTENT, String::new());
    }
    let req = match translate(&method, &uri, &headers, &body) {
        Ok(req) => req,
        Err(e) => return respond(status(e.status), e.to_json().to_string()),
    };
    // Long polls block inside the service, so keep them off the async workers.
    let resp = tokio::task::spawn_blocking(move || service.handle(req)).await;
    match resp {
        Ok(r) => respond(status(r.status), r.body.to_string()),
        Err(e) => {
            let err = ApiError::new(500, "internal", e.to_string());
            respond(StatusCode::INTERNAL_SERVER_ERROR, err.to_json().to_string())
        }
    }
}

fn translate(method: &HttpMethod, uri: &Uri, headers: &HeaderMap, body: &Bytes) -> Result<ApiRequest, ApiError> {
    let method = Method::from_str(method.as_str())
        .map_err(|_| ApiError::new(405, "method_not_allowed", format!("unsupported method {method}")))?;
    let target = uri.path_and_query().map_or(uri.path(), |pq| pq.as_str());
    let mut req = ApiRequest::new(method, target);
    req.token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|t| t.trim().to_owned());
    if !body.iter().all(u8::is_ascii_whitespace) {
        req.body = serde_json::from_slice::<Value>(body)
            .map_err(|e| ApiError::bad_request(format!("request body is not JSON: {e}")))?;
    }
    Ok(req)
}

fn status(code: u16) -> StatusCode {
    StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
}

fn respond(status: StatusCode, body: String) -> Response<Body> {
    let mut resp = Response::new(Body::from(body));
    *resp.status_mut() = status;
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    // The browser client is served from a different origin.
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("authorization, content-type"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, DELETE, OPTIONS"));
    resp
}
