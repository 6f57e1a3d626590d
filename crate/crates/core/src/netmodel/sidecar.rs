//! ZIP load parameters and the loading direction, read from a JSON sidecar:
//!
//! ```json
//! {
//!   "zip": [{"bus": 5, "az": 0.2, "ai": 0.3, "ap": 0.5,
//!            "bz": 0.2, "bi": 0.3, "bp": 0.5,
//!            "z_re": -1.1, "z_im": -0.4, "i_re": -0.9, "i_im": 0.3}],
//!   "direction": [{"bus": 5, "dp": -0.9, "dq": -0.3}]
//! }
//! ```
//!
//! All values are per-unit and injection-referenced: `z`, `i` and the
//! direction entries describe power flowing *into* the network, so a passive
//! load shows up with negative active terms.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Deserialize;

use super::{BusKind, CaseData};
use crate::error::{Error, Result};

const FRACTION_TOL: f64 = 1e-12;

/// ZIP parameters of one PQ bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipEntry {
    pub alpha_z: f64,
    pub alpha_i: f64,
    pub alpha_p: f64,
    pub beta_z: f64,
    pub beta_i: f64,
    pub beta_p: f64,
    pub z: Complex64,
    pub i: Complex64,
}

impl ZipEntry {
    /// Pure constant-power load.
    pub const CONSTANT_POWER: ZipEntry = ZipEntry {
        alpha_z: 0.0,
        alpha_i: 0.0,
        alpha_p: 1.0,
        beta_z: 0.0,
        beta_i: 0.0,
        beta_p: 1.0,
        z: Complex64::new(0.0, 0.0),
        i: Complex64::new(0.0, 0.0),
    };

    /// `Re(z)/|z|^2` weighted by `alpha_z`; zero when there is no Z share.
    pub fn z_conductance(&self) -> f64 {
        if self.alpha_z == 0.0 {
            0.0
        } else {
            self.alpha_z * self.z.re / self.z.norm_sqr()
        }
    }

    /// `Im(z)/|z|^2` weighted by `beta_z`; zero when there is no Z share.
    pub fn z_susceptance(&self) -> f64 {
        if self.beta_z == 0.0 {
            0.0
        } else {
            self.beta_z * self.z.im / self.z.norm_sqr()
        }
    }

    pub fn validate(&self, bus: usize) -> Result<()> {
        let vals = [
            self.alpha_z,
            self.alpha_i,
            self.alpha_p,
            self.beta_z,
            self.beta_i,
            self.beta_p,
            self.z.re,
            self.z.im,
            self.i.re,
            self.i.im,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Semantic(format!(
                "ZIP entry for bus {bus} has non-finite values"
            )));
        }
        let sa = self.alpha_z + self.alpha_i + self.alpha_p;
        let sb = self.beta_z + self.beta_i + self.beta_p;
        if (sa - 1.0).abs() > FRACTION_TOL {
            return Err(Error::Semantic(format!(
                "active ZIP fractions of bus {bus} sum to {sa}, not 1"
            )));
        }
        if (sb - 1.0).abs() > FRACTION_TOL {
            return Err(Error::Semantic(format!(
                "reactive ZIP fractions of bus {bus} sum to {sb}, not 1"
            )));
        }
        if (self.alpha_z != 0.0 || self.beta_z != 0.0) && self.z.norm_sqr() == 0.0 {
            return Err(Error::Semantic(format!(
                "bus {bus} has a constant-impedance share but zero impedance"
            )));
        }
        Ok(())
    }
}

/// ZIP entries keyed by external bus id. Buses not listed are pure
/// constant-power loads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZipConfig {
    entries: BTreeMap<usize, ZipEntry>,
}

impl ZipConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry, validating fractions and that `bus` is a PQ bus.
    pub fn insert(&mut self, case: &CaseData, bus: usize, entry: ZipEntry) -> Result<()> {
        let rec = case
            .bus(bus)
            .ok_or_else(|| Error::Semantic(format!("ZIP entry for unknown bus {bus}")))?;
        if rec.kind != BusKind::PQ {
            return Err(Error::Semantic(format!(
                "ZIP entry on bus {bus}, which is {:?} (ZIP is allowed only at PQ buses)",
                rec.kind
            )));
        }
        entry.validate(bus)?;
        if self.entries.insert(bus, entry).is_some() {
            return Err(Error::Semantic(format!(
                "duplicate ZIP entry for bus {bus}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, bus: usize) -> Option<&ZipEntry> {
        self.entries.get(&bus)
    }

    /// Effective entry for a PQ bus, defaulting to constant power.
    pub fn entry_or_default(&self, bus: usize) -> ZipEntry {
        self.entries
            .get(&bus)
            .copied()
            .unwrap_or(ZipEntry::CONSTANT_POWER)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &ZipEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }
}

/// Change of injection per unit of loading parameter at one bus.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Direction {
    pub dp: f64,
    pub dq: f64,
}

/// Loading direction keyed by external bus id; absent buses do not move.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectionVector {
    entries: BTreeMap<usize, Direction>,
}

impl DirectionVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry. PV and REF buses carry no reactive equation and REF
    /// carries no active one, so those components must be zero there.
    pub fn insert(&mut self, case: &CaseData, bus: usize, d: Direction) -> Result<()> {
        let rec = case
            .bus(bus)
            .ok_or_else(|| Error::Semantic(format!("direction entry for unknown bus {bus}")))?;
        if !d.dp.is_finite() || !d.dq.is_finite() {
            return Err(Error::Semantic(format!(
                "direction entry for bus {bus} is not finite"
            )));
        }
        if rec.kind != BusKind::PQ && d.dq != 0.0 {
            return Err(Error::Semantic(format!(
                "bus {bus} is {:?}; its reactive direction must be zero",
                rec.kind
            )));
        }
        if rec.kind == BusKind::REF && d.dp != 0.0 {
            return Err(Error::Semantic(format!(
                "bus {bus} is the reference; its active direction must be zero"
            )));
        }
        if self.entries.insert(bus, d).is_some() {
            return Err(Error::Semantic(format!(
                "duplicate direction entry for bus {bus}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, bus: usize) -> Direction {
        self.entries.get(&bus).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|d| d.dp == 0.0 && d.dq == 0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Direction)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSidecar {
    #[serde(default)]
    zip: Vec<RawZip>,
    #[serde(default)]
    direction: Vec<RawDirection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZip {
    bus: usize,
    az: f64,
    ai: f64,
    ap: f64,
    bz: f64,
    bi: f64,
    bp: f64,
    #[serde(default)]
    z_re: f64,
    #[serde(default)]
    z_im: f64,
    #[serde(default)]
    i_re: f64,
    #[serde(default)]
    i_im: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirection {
    bus: usize,
    #[serde(default)]
    dp: f64,
    #[serde(default)]
    dq: f64,
}

/// Parses a sidecar against `case`. Blank text is the empty sidecar.
pub fn parse_sidecar(text: &str, case: &CaseData) -> Result<(ZipConfig, DirectionVector)> {
    let mut zip = ZipConfig::new();
    let mut dir = DirectionVector::new();
    if text.trim().is_empty() {
        return Ok((zip, dir));
    }
    let raw: RawSidecar = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        expected: format!("valid sidecar JSON ({e})"),
    })?;
    for z in raw.zip {
        let entry = ZipEntry {
            alpha_z: z.az,
            alpha_i: z.ai,
            alpha_p: z.ap,
            beta_z: z.bz,
            beta_i: z.bi,
            beta_p: z.bp,
            z: Complex64::new(z.z_re, z.z_im),
            i: Complex64::new(z.i_re, z.i_im),
        };
        zip.insert(case, z.bus, entry)?;
    }
    for d in raw.direction {
        dir.insert(case, d.bus, Direction { dp: d.dp, dq: d.dq })?;
    }
    Ok((zip, dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::parse_case;

    fn case() -> CaseData {
        parse_case(
            "mpc.baseMVA = 100;
mpc.bus = [1 3 0 0 0 0 1 1 0; 2 1 50 20 0 0 1 1 0; 3 2 0 0 0 0 1 1 0];
mpc.gen = [1 0 0 0 0 1 100 1; 3 40 0 0 0 1.02 100 1];
mpc.branch = [1 2 0.01 0.1 0 0 0 0 0 0 1; 2 3 0.01 0.1 0 0 0 0 0 0 1];",
        )
        .unwrap()
    }

    #[test]
    fn empty_sidecar_defaults() {
        let c = case();
        for text in ["", "  \n", "{}"] {
            let (zip, dir) = parse_sidecar(text, &c).unwrap();
            assert!(zip.is_empty());
            assert!(dir.is_zero());
            assert_eq!(zip.entry_or_default(2), ZipEntry::CONSTANT_POWER);
            assert_eq!(dir.get(2), Direction::default());
        }
    }

    #[test]
    fn full_entry() {
        let (zip, dir) = parse_sidecar(
            r#"{"zip":[{"bus":2,"az":0.2,"ai":0.3,"ap":0.5,"bz":0,"bi":0,"bp":1,
                "z_re":-2,"z_im":-1,"i_re":-0.5,"i_im":0.1}],
                "direction":[{"bus":2,"dp":-0.5,"dq":-0.2},{"bus":3,"dp":0.1}]}"#,
            &case(),
        )
        .unwrap();
        let e = zip.get(2).unwrap();
        assert_eq!(e.alpha_i, 0.3);
        assert_eq!(e.z, Complex64::new(-2.0, -1.0));
        assert_eq!(dir.get(2), Direction { dp: -0.5, dq: -0.2 });
        assert_eq!(dir.get(3).dp, 0.1);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let err = parse_sidecar(
            r#"{"zip":[{"bus":2,"az":0.5,"ai":0.3,"ap":0.3,"bz":0,"bi":0,"bp":1,"z_re":1}]}"#,
            &case(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Semantic(m) if m.contains("sum to")));
    }

    #[test]
    fn zip_only_on_pq() {
        for bus in [1, 3] {
            let text =
                format!(r#"{{"zip":[{{"bus":{bus},"az":0,"ai":0,"ap":1,"bz":0,"bi":0,"bp":1}}]}}"#);
            assert!(matches!(
                parse_sidecar(&text, &case()),
                Err(Error::Semantic(_))
            ));
        }
    }

    #[test]
    fn unknown_bus_and_bad_direction() {
        let c = case();
        assert!(parse_sidecar(r#"{"direction":[{"bus":9,"dp":1}]}"#, &c).is_err());
        assert!(parse_sidecar(r#"{"direction":[{"bus":3,"dq":1}]}"#, &c).is_err());
        assert!(parse_sidecar(r#"{"direction":[{"bus":1,"dp":1}]}"#, &c).is_err());
    }

    #[test]
    fn impedance_required_for_z_share() {
        let err = parse_sidecar(
            r#"{"zip":[{"bus":2,"az":1,"ai":0,"ap":0,"bz":0,"bi":0,"bp":1}]}"#,
            &case(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Semantic(m) if m.contains("zero impedance")));
    }

    #[test]
    fn malformed_json_is_syntax() {
        let err = parse_sidecar("{\"zip\": [", &case()).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, .. }));
        assert!(matches!(
            parse_sidecar(r#"{"zipp":[]}"#, &case()),
            Err(Error::Syntax { .. })
        ));
    }
}
