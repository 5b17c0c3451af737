use std::collections::BTreeMap;

use axum::http::StatusCode;
use serde_json::Value;

use super::check;
use crate::common::*;

const MISSING: &str = "0123456789abcdef0123456789abcdef";
const WINDOW: usize = 10;
const FRAMES: usize = 30;
const WEIGHTS: [f64; 8] = [0.7, 0.9, 0.8, 0.3, 0.2, 0.2, 0.3, 0.2];

/// `10 * sum(w * p)` of the largest box in a reply, 0 without one.
fn oracle_frame_score(reply: &Value) -> f64 {
    let boxes = reply["boxes"].as_array().unwrap();
    let area = |b: &Value| b["w"].as_u64().unwrap() * b["h"].as_u64().unwrap();
    let mut best: Option<&Value> = None;
    for b in boxes {
        if best.is_none_or(|c| area(b) > area(c)) {
            best = Some(b);
        }
    }
    best.map_or(0.0, |b| {
        let probs = b["probs"].as_array().unwrap();
        10.0 * probs.iter().zip(WEIGHTS).map(|(p, w)| p.as_f64().unwrap() * w).sum::<f64>()
    })
}

/// Report fields recomputed straight from the JSONL lines.
fn oracle_report(log: &str) -> Value {
    let lines: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let head = &lines[0];
    let mut counts: BTreeMap<String, u64> = [
        "neutral", "happiness", "surprise", "sadness", "anger", "disgust", "fear", "contempt", "unknown",
    ]
    .iter()
    .map(|l| (l.to_string(), 0))
    .collect();
    let (mut frames, mut live, mut faces, mut eng, mut eng_n) = (0u64, 0u64, 0u64, 0.0, 0u64);
    let preds: Vec<&Value> = lines[1..].iter().filter(|l| l["kind"] == "prediction").collect();
    for p in &preds {
        frames += 1;
        if p["mode"] == "live" {
            live += 1;
            if let Some(e) = p["engagement"].as_f64() {
                eng += e;
                eng_n += 1;
            }
        }
        for f in p["faces"].as_array().unwrap() {
            faces += 1;
            *counts.get_mut(f["label"].as_str().unwrap()).unwrap() += 1;
        }
    }
    serde_json::json!({
        "id": head["id"],
        "name": head["name"],
        "created": head["created"],
        "frames": frames,
        "live_frames": live,
        "faces": faces,
        "label_counts": counts,
        "mean_engagement": if eng_n > 0 { Value::from(eng / eng_n as f64) } else { Value::Null },
        "first": preds.first().map_or(Value::Null, |p| p["timestamp"].clone()),
        "last": preds.last().map_or(Value::Null, |p| p["timestamp"].clone()),
    })
}

async fn run() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let state = fixture_state(dir.path(), WINDOW);

    // endpoints
    let (status, session) = create_session(&state, "acceptance").await;
    check(status == StatusCode::OK, format!("create: {status}"))?;
    check(schema_errors("session", &session).is_empty(), "create reply off schema")?;
    let (status, _) = create_session(&state, "").await;
    check(status == StatusCode::BAD_REQUEST, format!("empty name: {status}"))?;
    let id = session["id"].as_str().unwrap().to_string();
    let face = fixture_bytes("images/face.png");
    let blank = fixture_bytes("images/blank.png");
    let (status, _) = predict(&state, MISSING, face.clone()).await;
    check(status == StatusCode::NOT_FOUND, format!("predict unknown session: {status}"))?;
    let (status, _) = report(&state, MISSING).await;
    check(status == StatusCode::NOT_FOUND, format!("report unknown session: {status}"))?;
    let (status, _) = predict(&state, &id, b"not an image".to_vec()).await;
    check(status == StatusCode::UNPROCESSABLE_ENTITY, format!("undecodable upload: {status}"))?;
    let (status, pred) = predict(&state, &id, face.clone()).await;
    check(status == StatusCode::OK, format!("predict: {status}"))?;
    check(schema_errors("predict", &pred).is_empty(), "predict reply off schema")?;
    check(pred["faces"].as_array().unwrap().len() == 1, "face fixture should give one face")?;
    let (status, rep) = report(&state, &id).await;
    check(status == StatusCode::OK && rep["frames"] == 1 && rep["faces"] == 1, format!("report after one upload: {rep}"))?;

    // live replay
    let addr = spawn_server(state.clone()).await;
    check(connect_live(addr, MISSING).await.is_err(), "live upgrade for unknown session")?;
    let mut ws = connect_live(addr, &id).await.map_err(|e| e.to_string())?;
    let mut scores = Vec::new();
    let mut max_err = 0.0f64;
    for k in 0..FRAMES {
        let frame = if k % 3 == 2 { blank.clone() } else { face.clone() };
        let reply = send_frame(&mut ws, frame).await;
        check(schema_errors("live_reply", &reply).is_empty(), format!("frame {k} off schema: {reply}"))?;
        check(reply["seq"] == (k + 1) as u64, format!("frame {k}: seq {}", reply["seq"]))?;
        scores.push(oracle_frame_score(&reply));
        let window = &scores[scores.len().saturating_sub(WINDOW)..];
        let want = window.iter().sum::<f64>() / window.len() as f64;
        max_err = max_err.max((reply["engagement"].as_f64().unwrap() - want).abs());
    }
    check(max_err <= 1e-6, format!("engagement differs from window mean by {max_err:e}"))?;
    check(scores.iter().any(|&s| s > 0.0), "no face scored")?;
    ws.close(None).await.map_err(|e| e.to_string())?;

    // log replay
    let (_, served) = report(&state, &id).await;
    let log = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).map_err(|e| e.to_string())?;
    let replayed = oracle_report(&log);
    check(served == replayed, format!("served {served}\nreplayed {replayed}"))?;
    let (_, restarted) = report(&fixture_state(dir.path(), WINDOW), &id).await;
    check(restarted == served, "report changed after restart")?;

    Ok(format!(
        "create/404/422/report ok; {FRAMES} live frames seq 1..{FRAMES}, engagement max err {max_err:.1e} \
         (window {WINDOW}); report equals JSONL replay"
    ))
}

pub fn service_contract() -> Result<String, String> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(run())
}
