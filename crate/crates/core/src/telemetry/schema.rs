use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::TelemetryError;

/// One reading from the plug, stamped with the device's own clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub ts_ms: i64,
    pub watts: f64,
    pub wh_total: f64,
}

impl PowerSample {
    pub fn new(ts_ms: i64, watts: f64, wh_total: f64) -> Result<Self, TelemetryError> {
        check_reading("power_w", watts)?;
        check_reading("energy_wh_total", wh_total)?;
        Ok(Self { ts_ms, watts, wh_total })
    }
}

fn check_reading(field: &str, v: f64) -> Result<(), TelemetryError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(TelemetryError::InvalidValue { field: field.to_string(), value: v.to_string() })
    }
}

/// Device-minus-host clock offset measured by one probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockOffset {
    pub offset_ms: f64,
    pub rtt_ms: f64,
}

/// Multiplicative scale applied to each extracted field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scale {
    pub power_w: f64,
    pub energy_wh_total: f64,
    pub ts_ms: f64,
}

impl Default for Scale {
    fn default() -> Self {
        Self { power_w: 1.0, energy_wh_total: 1.0, ts_ms: 1.0 }
    }
}

/// Maps a vendor status payload onto the canonical fields.
///
/// Source paths are dot separated; numeric segments index into arrays, so
/// `"meters.0.power"` reads `body["meters"][0]["power"]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusMapping {
    #[serde(default = "default_status_path")]
    pub status_path: String,
    pub power_w: String,
    pub energy_wh_total: String,
    pub ts_ms: String,
    #[serde(default)]
    pub scale: Scale,
}

fn default_status_path() -> String {
    "/status".to_string()
}

impl Default for StatusMapping {
    fn default() -> Self {
        Self::canonical()
    }
}

impl StatusMapping {
    /// Identity mapping for plugs (and the simulator) that already speak the
    /// canonical schema.
    pub fn canonical() -> Self {
        Self {
            status_path: default_status_path(),
            power_w: "power_w".into(),
            energy_wh_total: "energy_wh_total".into(),
            ts_ms: "ts_ms".into(),
            scale: Scale::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, TelemetryError> {
        serde_json::from_str(text).map_err(|e| TelemetryError::Protocol(format!("bad mapping file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, TelemetryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn extract(&self, body: &Value) -> Result<PowerSample, TelemetryError> {
        let watts = lookup_number(body, &self.power_w, "power_w")? * self.scale.power_w;
        let wh = lookup_number(body, &self.energy_wh_total, "energy_wh_total")? * self.scale.energy_wh_total;
        let ts = lookup_number(body, &self.ts_ms, "ts_ms")? * self.scale.ts_ms;
        if !ts.is_finite() {
            return Err(TelemetryError::InvalidValue { field: "ts_ms".into(), value: ts.to_string() });
        }
        PowerSample::new(ts.round() as i64, watts, wh)
    }
}

fn lookup_number(body: &Value, path: &str, field: &str) -> Result<f64, TelemetryError> {
    let mut cur = body;
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        let next = match cur {
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
            Value::Object(map) => map.get(seg),
            _ => None,
        };
        cur = next.ok_or_else(|| TelemetryError::MissingField(field.to_string()))?;
    }
    cur.as_f64().ok_or_else(|| TelemetryError::InvalidValue {
        field: field.to_string(),
        value: cur.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_body_maps_one_to_one() {
        let body = json!({"power_w": 100.0, "energy_wh_total": 5.0, "ts_ms": 1_700_000_000_000i64});
        let s = StatusMapping::canonical().extract(&body).unwrap();
        assert_eq!(s, PowerSample { ts_ms: 1_700_000_000_000, watts: 100.0, wh_total: 5.0 });
    }

    #[test]
    fn missing_counter_names_the_field() {
        let body = json!({"power_w": 100.0, "ts_ms": 1});
        match StatusMapping::canonical().extract(&body) {
            Err(TelemetryError::MissingField(f)) => assert_eq!(f, "energy_wh_total"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_power_is_rejected() {
        let body = json!({"power_w": -1.0, "energy_wh_total": 5.0, "ts_ms": 1});
        assert!(matches!(
            StatusMapping::canonical().extract(&body),
            Err(TelemetryError::InvalidValue { .. })
        ));
    }

    #[test]
    fn non_numeric_field_is_rejected() {
        let body = json!({"power_w": "high", "energy_wh_total": 5.0, "ts_ms": 1});
        assert!(StatusMapping::canonical().extract(&body).is_err());
    }

    #[test]
    fn vendor_mapping_with_nesting_and_scale() {
        let mapping = StatusMapping::from_json(
            r#"{"status_path": "/rpc/Switch.GetStatus?id=0",
                "power_w": "apower",
                "energy_wh_total": "aenergy.total",
                "ts_ms": "aenergy.minute_ts",
                "scale": {"ts_ms": 1000}}"#,
        )
        .unwrap();
        let body = json!({"apower": 42.5, "aenergy": {"total": 1234.5, "minute_ts": 1_700_000_000i64}});
        let s = mapping.extract(&body).unwrap();
        assert_eq!(s.ts_ms, 1_700_000_000_000);
        assert_eq!(s.watts, 42.5);
        assert_eq!(s.wh_total, 1234.5);
        assert_eq!(mapping.scale.power_w, 1.0);
    }

    #[test]
    fn array_indices_in_paths() {
        let mapping = StatusMapping {
            power_w: "meters.1.power".into(),
            energy_wh_total: "meters.1.total".into(),
            ts_ms: "unixtime".into(),
            ..StatusMapping::canonical()
        };
        let body = json!({"meters": [{"power": 1.0, "total": 1.0}, {"power": 7.0, "total": 9.0}], "unixtime": 5});
        let s = mapping.extract(&body).unwrap();
        assert_eq!((s.watts, s.wh_total, s.ts_ms), (7.0, 9.0, 5));
    }
}
