//! Newline-delimited JSON messages exchanged with external model servers.
//!
//! ```text
//! → {"op":"hello"}
//! ← {"op":"hello","num_classes":N,"clip_depth":D,"input_size":112,"labels":[...]}
//! → {"op":"infer","id":K,"shape":[3,D,112,112],"data_b64":"..."}
//! ← {"op":"infer","id":K,"probs":[...]}
//! ← {"op":"error","id":K,"message":"..."}
//! ```

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BackendError, BackendInfo, LabelSet};
use crate::stream::Clip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Hello,
    Infer {
        id: u64,
        shape: [usize; 4],
        data_b64: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Response {
    Hello {
        num_classes: usize,
        clip_depth: usize,
        input_size: usize,
        labels: Vec<String>,
    },
    Infer {
        id: u64,
        probs: Vec<f64>,
    },
    Error {
        #[serde(default)]
        id: Option<u64>,
        message: String,
    },
}

impl Request {
    pub fn infer(id: u64, clip: &Clip) -> Self {
        Request::Infer {
            id,
            shape: clip.shape(),
            data_b64: STANDARD.encode(clip.to_bytes()),
        }
    }

    /// One JSON document terminated by `\n`.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("request serializes");
        line.push('\n');
        line
    }
}

impl Response {
    pub fn parse(line: &str) -> Result<Self, BackendError> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
            .map_err(|e| BackendError::ProtocolViolation(format!("malformed response: {e}")))
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("response serializes");
        line.push('\n');
        line
    }

    pub fn hello_for(info: &BackendInfo) -> Self {
        Response::Hello {
            num_classes: info.num_classes,
            clip_depth: info.clip_depth,
            input_size: info.input_size,
            labels: info.label_set.labels().to_vec(),
        }
    }
}

/// Converts a hello response into validated backend metadata.
pub fn info_from_hello(
    num_classes: usize,
    clip_depth: usize,
    input_size: usize,
    labels: Vec<String>,
    label_set_id: &str,
) -> Result<BackendInfo, BackendError> {
    let label_set = LabelSet::new(label_set_id, labels)
        .map_err(|e| BackendError::ProtocolViolation(format!("hello labels: {e}")))?;
    let info = BackendInfo {
        num_classes,
        clip_depth,
        input_size,
        label_set,
    };
    info.validate()
        .map_err(|e| BackendError::ProtocolViolation(format!("hello: {e}")))?;
    Ok(info)
}

/// Decodes the `data_b64` payload of an infer request.
pub fn decode_clip_bytes(data_b64: &str) -> Result<Vec<u8>, BackendError> {
    STANDARD
        .decode(data_b64)
        .map_err(|e| BackendError::ProtocolViolation(format!("bad base64: {e}")))
}
