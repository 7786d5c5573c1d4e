//! The JSON shape shared by the HTTP narrate endpoints and `narrate --json`.

use serde::Serialize;
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::answer_generator::PlanContext;
use crate::narration::NarrationStep;

/// Content-derived plan id: equal plan bytes give equal ids.
pub fn plan_id(raw_text: &str) -> String {
    let digest = Sha256::digest(raw_text.as_bytes());
    format!("p{}", &hex::encode(digest)[..16])
}

#[derive(Debug, Serialize)]
pub struct NarrateResponse<'a> {
    pub plan_id: String,
    pub steps: &'a [NarrationStep],
    /// The EXPLAIN JSON embedded verbatim, surrounding whitespace trimmed.
    pub raw_plan: &'a RawValue,
}

impl<'a> NarrateResponse<'a> {
    pub fn new(ctx: &'a PlanContext) -> Self {
        let raw: &RawValue = serde_json::from_str(ctx.raw_text.trim()).expect("raw plan text is valid JSON");
        NarrateResponse {
            plan_id: plan_id(&ctx.raw_text),
            steps: &ctx.script.steps,
            raw_plan: raw,
        }
    }

    /// The response body: compact JSON followed by a newline.
    pub fn to_body(&self) -> String {
        let mut body = serde_json::to_string(self).expect("response serializes");
        body.push('\n');
        body
    }
}
