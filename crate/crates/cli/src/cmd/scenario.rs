use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde_json::Value;
use twin_api::{evaluate_scenario, Snapshot};
use twin_models::runoff::ScenarioSpec;

use crate::error::{CliError, CliResult};
use crate::Ctx;

pub struct ScenarioArgs {
    pub station: String,
    pub horizon: usize,
    pub multiply: Vec<String>,
    pub offset: Vec<String>,
    pub server: Option<String>,
    pub now: Option<DateTime<Utc>>,
}

fn parse_pairs(flag: &str, items: &[String]) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (var, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--{flag} expects var=value, got '{item}'")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| CliError::usage(format!("--{flag} {var}: '{value}' is not a number")))?;
        if out.insert(var.to_string(), v).is_some() {
            return Err(CliError::usage(format!("--{flag} given twice for {var}")));
        }
    }
    Ok(out)
}

pub fn run(ctx: &Ctx, args: ScenarioArgs) -> CliResult<()> {
    let spec = ScenarioSpec {
        station: args.station.clone(),
        horizon: args.horizon,
        multipliers: parse_pairs("multiply", &args.multiply)?,
        offsets: parse_pairs("offset", &args.offset)?,
    };
    let result = match &args.server {
        Some(url) => remote(url, &spec)?,
        None => {
            let snap = Snapshot::build(&ctx.root, args.now.unwrap_or_else(Utc::now))?;
            evaluate_scenario(&snap, &spec)?
        }
    };
    if ctx.json {
        println!("{result}");
    } else {
        println!(
            "station {} horizon {} h: baseline {:.4}, perturbed {:.4}, delta {:+.4}",
            result["station"].as_str().unwrap_or(""),
            result["horizon"],
            result["baseline"].as_f64().unwrap_or(f64::NAN),
            result["perturbed"].as_f64().unwrap_or(f64::NAN),
            result["delta"].as_f64().unwrap_or(f64::NAN)
        );
        if result["stale"] == true {
            println!("warning: input data is stale");
        }
    }
    Ok(())
}

fn remote(url: &str, spec: &ScenarioSpec) -> CliResult<Value> {
    let endpoint = format!("{}/scenario", url.trim_end_matches('/'));
    let resp = reqwest::blocking::Client::new()
        .post(&endpoint)
        .json(spec)
        .send()
        .map_err(|e| CliError::failed(format!("POST {endpoint}: {e}")))?;
    let status = resp.status();
    let body: Value = resp
        .json()
        .map_err(|e| CliError::failed(format!("POST {endpoint}: unreadable response: {e}")))?;
    if status.is_success() {
        return Ok(body);
    }
    let message = format!(
        "server returned {} {}: {}",
        status.as_u16(),
        body["error"].as_str().unwrap_or("error"),
        body["detail"].as_str().unwrap_or("")
    );
    Err(if status.as_u16() == 400 {
        CliError::usage(message)
    } else {
        CliError::failed(message)
    })
}
