use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use bridge_pinn::data::synthesize;
use bridge_pinn::domain::split_train_test;
use bridge_pinn::models;
use bridge_pinn::service::{router, AppState, LoadedModel, ServiceConfig};
use bridge_pinn::training::{train, TrainConfig};
use bridge_pinn::vision::render::{reference_designs, render};
use serde_json::{json, Value};
use tower::ServiceExt;

/// A quickly trained model with a fabricated evaluation block.
fn model(dir: &std::path::Path) -> LoadedModel {
    let ds = split_train_test(synthesize(3, 30).unwrap(), 0.2, 3).unwrap();
    let cfg = TrainConfig { epochs: 3, ..TrainConfig::pinn(3) };
    let (mut model, _) = train(&ds, &cfg).unwrap();
    model.metadata.evaluation = Some(json!({ "mae": 1.25, "r2": 0.9, "note": "kept verbatim" }));
    let path = dir.join("small-pinn.json");
    models::save(&model, &path).unwrap();
    LoadedModel::from_path(&path).unwrap()
}

fn app(model: Option<LoadedModel>, config: ServiceConfig) -> Router {
    router(AppState::new(model, config))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn post_json(path: &str, body: &str) -> Request<Body> {
    Request::post(path).header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_owned())).unwrap()
}

fn multipart(parts: &[(&str, Option<&str>, &[u8])]) -> Request<Body> {
    let boundary = "xBOUNDARYx";
    let mut body = Vec::new();
    for (name, filename, data) in parts {
        body.extend(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"").as_bytes());
        if let Some(f) = filename {
            body.extend(format!("; filename=\"{f}\"\r\nContent-Type: application/octet-stream").as_bytes());
        }
        body.extend(b"\r\n\r\n");
        body.extend(*data);
        body.extend(b"\r\n");
    }
    body.extend(format!("--{boundary}--\r\n").as_bytes());
    Request::post("/api/extract").header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}")).body(Body::from(body)).unwrap()
}

fn png(img: &image::RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
    buf.into_inner()
}

const DESIGN: &str = r#"{"beam_count": 30, "mean_length_mm": 80, "mean_angle_deg": 45}"#;

#[tokio::test]
async fn predict_contract() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(Some(model(dir.path())), ServiceConfig::default());

    let (status, body) = call(&app, post_json("/api/predict", DESIGN)).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["weight_g"].as_f64().unwrap().is_finite());
    assert_eq!(body["error_band_g"], 1.25);
    assert_eq!(body["model_id"], "small-pinn");
    assert_eq!(body["residuals"]["terms"].as_object().unwrap().len(), 3);

    let (status, again) = call(&app, post_json("/api/predict", DESIGN)).await;
    assert_eq!((status, &again), (StatusCode::OK, &body));

    let (status, body) = call(&app, post_json("/api/predict", "{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());

    for (payload, field) in [
        (r#"{"beam_count": 0, "mean_length_mm": 80, "mean_angle_deg": 45}"#, "beam_count"),
        (r#"{"beam_count": 10, "mean_angle_deg": 45}"#, "mean_length_mm"),
        (r#"{"beam_count": 10, "mean_length_mm": 80}"#, "mean_angle_deg"),
        (r#"{"beam_count": 10, "mean_length_mm": 80, "mean_angle_deg": 45, "model_id": "other"}"#, "model_id"),
    ] {
        let (status, body) = call(&app, post_json("/api/predict", payload)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{payload}");
        assert_eq!(body["field"], field, "{payload}: {body}");
    }
}

#[tokio::test]
async fn no_model_gives_503_and_empty_list() {
    let app = app(None, ServiceConfig::default());
    assert_eq!(call(&app, post_json("/api/predict", DESIGN)).await.0, StatusCode::SERVICE_UNAVAILABLE);
    let compare = format!(r#"{{"designs": [{{"name": "a", {0}}}, {{"name": "b", {0}}}]}}"#, &DESIGN[1..DESIGN.len() - 1]);
    assert_eq!(call(&app, post_json("/api/compare", &compare)).await.0, StatusCode::SERVICE_UNAVAILABLE);
    let (status, body) = call(&app, Request::get("/api/models").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "models": [] }));
}

#[tokio::test]
async fn compare_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(Some(model(dir.path())), ServiceConfig::default());
    let design = |name: &str, count: usize| json!({ "name": name, "beam_count": count, "mean_length_mm": 80.0, "mean_angle_deg": 45.0 });

    let body = json!({ "designs": [design("big", 60), design("small", 10), design("mid", 30)] }).to_string();
    let (status, resp) = call(&app, post_json("/api/compare", &body)).await;
    assert_eq!(status, StatusCode::OK);
    let results = resp["results"].as_array().unwrap();
    let weights: Vec<f64> = results.iter().map(|r| r["weight_g"].as_f64().unwrap()).collect();
    assert!(weights.windows(2).all(|w| w[0] <= w[1]), "{weights:?}");
    let mut names: Vec<&str> = results.iter().map(|r| r["name"].as_str().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["big", "mid", "small"]);

    for n in [1, 21] {
        let body = json!({ "designs": (0..n).map(|i| design(&format!("d{i}"), 20)).collect::<Vec<_>>() }).to_string();
        let (status, resp) = call(&app, post_json("/api/compare", &body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(resp["field"], "designs");
    }
    let body = json!({ "designs": [design("ok", 20), design("bad", 0)] }).to_string();
    assert_eq!(call(&app, post_json("/api/compare", &body)).await.1["field"], "designs[1].beam_count");

    let (status, resp) = call(&app, Request::get("/api/models").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let list = resp["models"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["id"], "small-pinn");
    assert_eq!(list[0]["arch"], "pinn");
    assert_eq!(list[0]["metrics"], json!({ "mae": 1.25, "r2": 0.9, "note": "kept verbatim" }));
    assert_eq!(list[0]["feature_schema"].as_array().unwrap().len(), 8);

    for path in ["/api/unknown", "/elsewhere"] {
        assert_eq!(call(&app, Request::get(path).body(Body::empty()).unwrap()).await.0, StatusCode::NOT_FOUND);
    }
}

#[tokio::test]
async fn extract_contract() {
    let config = ServiceConfig { max_upload_bytes: 64 * 1024, extract_workers: 2, ..Default::default() };
    let app = app(None, config);
    let design = &reference_designs()[3];
    let image = png(&render(design, 4.0));

    let (status, body) = call(&app, multipart(&[("image", Some("t.png"), &image), ("scale_factor", None, b"0.5")])).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["beam_count"].as_u64().unwrap() as usize, design.members.len());
    assert_eq!(body["scale_factor"], 0.5);

    let blank = png(&image::RgbImage::from_pixel(120, 120, image::Rgb([255, 255, 255])));
    assert_eq!(call(&app, multipart(&[("image", Some("b.png"), &blank), ("scale_factor", None, b"0.5")])).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(&app, multipart(&[("image", Some("t.png"), &image)])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "scale_factor");

    let (status, body) = call(&app, multipart(&[("image", Some("t.png"), &image), ("scale_factor", None, b"-1")])).await;
    assert_eq!((status, body["field"].as_str()), (StatusCode::BAD_REQUEST, Some("scale_factor")));

    let (status, body) = call(&app, multipart(&[("image", Some("x.png"), b"garbage"), ("scale_factor", None, b"0.5")])).await;
    assert_eq!((status, body["field"].as_str()), (StatusCode::BAD_REQUEST, Some("image")));

    let noise: Vec<u8> = (0..200_000u32).map(|i| (i.wrapping_mul(2_654_435_761) >> 24) as u8).collect();
    let status = call(&app, multipart(&[("image", Some("big.png"), &noise), ("scale_factor", None, b"0.5")])).await.0;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}
