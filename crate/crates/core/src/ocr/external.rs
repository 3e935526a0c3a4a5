use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{OcrError, TextItem, TextRole};
use crate::geom::BBox;
use crate::raster::RasterImage;

/// Environment variable naming the subprocess OCR engine.
pub const OCR_CMD_ENV: &str = "CHART2SVG_OCR_CMD";

/// Wire format of one recognized string: `{text, bbox: [x, y, w, h], confidence}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalOcrItem {
    pub text: String,
    pub bbox: [f64; 4],
    pub confidence: f64,
}

/// Pluggable OCR backend: PNG bytes plus optional region in, recognized strings out.
pub trait OcrClient: Send + Sync {
    fn recognize(&self, png: &[u8], region: Option<BBox>) -> Result<Vec<ExternalOcrItem>, OcrError>;

    /// Whether concurrent calls are safe; callers serialize otherwise.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Clamps boxes and confidences into range. Returns the items plus one
/// diagnostic line per adjusted item.
pub fn normalize_external(raw: &[ExternalOcrItem], width: u32, height: u32) -> (Vec<TextItem>, Vec<String>) {
    let mut diagnostics = Vec::new();
    let items = raw
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let [x, y, w, h] = it.bbox;
            let b = BBox::new(x, y, w.max(0.0), h.max(0.0));
            let clamped = b.clamp_to(width as f64, height as f64);
            if clamped != b {
                diagnostics.push(format!("item {i} ({:?}): bbox clamped to image", it.text));
            }
            let confidence = if it.confidence.is_finite() { it.confidence.clamp(0.0, 1.0) } else { 0.0 };
            if confidence != it.confidence {
                diagnostics.push(format!("item {i} ({:?}): confidence clamped", it.text));
            }
            TextItem {
                text: it.text.clone(),
                bbox: clamped,
                confidence,
                role: TextRole::Unknown,
            }
        })
        .collect();
    (items, diagnostics)
}

/// Runs an external OCR backend and normalizes its results.
pub fn ocr_external(image: &RasterImage, region: Option<&BBox>, client: &dyn OcrClient) -> Result<(Vec<TextItem>, Vec<String>), OcrError> {
    let png = image
        .to_png_bytes()
        .map_err(|e| OcrError::ClientUnavailable(format!("cannot encode image: {e}")))?;
    let raw = client.recognize(&png, region.copied())?;
    Ok(normalize_external(&raw, image.width(), image.height()))
}

/// Replays canned results; `None` simulates an unreachable backend.
pub struct FixtureOcrClient {
    items: Option<Vec<ExternalOcrItem>>,
}

impl FixtureOcrClient {
    pub fn new(items: Vec<ExternalOcrItem>) -> Self {
        FixtureOcrClient { items: Some(items) }
    }

    pub fn unavailable() -> Self {
        FixtureOcrClient { items: None }
    }
}

impl OcrClient for FixtureOcrClient {
    fn recognize(&self, _png: &[u8], _region: Option<BBox>) -> Result<Vec<ExternalOcrItem>, OcrError> {
        self.items
            .clone()
            .ok_or_else(|| OcrError::ClientUnavailable("fixture configured as unavailable".into()))
    }
}

/// Pipes PNG bytes to a command's stdin and reads a JSON list from stdout. A region
/// is passed as `--region x,y,w,h`.
pub struct SubprocessOcrClient {
    command: String,
    // The engine is assumed to be single-flight.
    lock: Mutex<()>,
}

impl SubprocessOcrClient {
    pub fn new(command: impl Into<String>) -> Self {
        SubprocessOcrClient {
            command: command.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn from_env() -> Result<Self, OcrError> {
        std::env::var(OCR_CMD_ENV)
            .map(Self::new)
            .map_err(|_| OcrError::ClientUnavailable(format!("{OCR_CMD_ENV} is not set")))
    }
}

impl OcrClient for SubprocessOcrClient {
    fn recognize(&self, png: &[u8], region: Option<BBox>) -> Result<Vec<ExternalOcrItem>, OcrError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut cmd = Command::new(&self.command);
        if let Some(r) = region {
            cmd.arg("--region").arg(format!("{},{},{},{}", r.x, r.y, r.w, r.h));
        }
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| OcrError::ClientUnavailable(format!("cannot start {}: {e}", self.command)))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(png)
            .map_err(|e| OcrError::ClientUnavailable(format!("cannot write image: {e}")))?;
        let out = child
            .wait_with_output()
            .map_err(|e| OcrError::ClientUnavailable(format!("ocr process failed: {e}")))?;
        if !out.status.success() {
            return Err(OcrError::ClientUnavailable(format!(
                "ocr process exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| OcrError::MalformedOutput(e.to_string()))
    }

    fn concurrent(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rgb;

    fn img() -> RasterImage {
        RasterImage::new(100, 50, Rgb::WHITE)
    }

    #[test]
    fn fixture_echo() {
        let c = FixtureOcrClient::new(vec![ExternalOcrItem {
            text: "Revenue".into(),
            bbox: [10.0, 5.0, 60.0, 12.0],
            confidence: 0.98,
        }]);
        let (items, diag) = ocr_external(&img(), None, &c).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].text, "Revenue");
        assert_eq!(items[0].bbox, BBox::new(10.0, 5.0, 60.0, 12.0));
        assert_eq!(items[0].confidence, 0.98);
        assert!(diag.is_empty());
    }

    #[test]
    fn out_of_bounds_clamped_and_flagged() {
        let c = FixtureOcrClient::new(vec![ExternalOcrItem {
            text: "x".into(),
            bbox: [90.0, 40.0, 30.0, 30.0],
            confidence: 0.5,
        }]);
        let (items, diag) = ocr_external(&img(), None, &c).unwrap();
        assert_eq!(items[0].bbox, BBox::new(90.0, 40.0, 10.0, 10.0));
        assert_eq!(diag.len(), 1);
    }

    #[test]
    fn unavailable_client() {
        let err = ocr_external(&img(), None, &FixtureOcrClient::unavailable()).unwrap_err();
        assert!(matches!(err, OcrError::ClientUnavailable(_)));
        let missing = SubprocessOcrClient::new("/nonexistent/ocr-engine");
        assert!(matches!(ocr_external(&img(), None, &missing), Err(OcrError::ClientUnavailable(_))));
    }

    #[cfg(unix)]
    #[test]
    fn subprocess_adapter_reads_json() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("ocr.sh");
        std::fs::write(
            &script,
            "#!/bin/sh\ncat > /dev/null\necho '[{\"text\":\"42\",\"bbox\":[1,2,12,10],\"confidence\":0.9}]'\n",
        )
        .unwrap();
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let c = SubprocessOcrClient::new(script.to_string_lossy());
        let (items, _) = ocr_external(&img(), None, &c).unwrap();
        assert_eq!(items[0].text, "42");
        assert!(!c.concurrent());
    }
}
