//! Power profiles, usage scenarios and battery lifetime.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perf::percent_delta;

pub const AES128_ST: &str = "AES-128-ST";
pub const AES256_ST: &str = "AES-256-ST";
pub const AES_PARALL: &str = "AES-PARALL";
pub const AES_RECONF: &str = "AES-RECONF";

/// Typical Li-ion cell voltage.
pub const DEFAULT_VOLTAGE_V: f64 = 3.7;
pub const DEFAULT_CAPACITY_MAH: f64 = 5000.0;

const SCENARIO_SUM_TOLERANCE: f64 = 0.02;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("invalid power profile for {design}: {message}")]
    InvalidProfile { design: String, message: String },
    #[error("invalid scenario {id}: {message}")]
    InvalidScenario { id: u32, message: String },
    #[error("invalid battery: {0}")]
    InvalidBattery(String),
    #[error("power must be positive to compute a lifetime, got {0} mW")]
    ZeroPower(f64),
    #[error("no power profile for {0}")]
    MissingProfile(String),
    #[error("{design} has no power figure for mode {mode}")]
    MissingMode { design: String, mode: Mode },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Operating conditions of the test cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Idle,
    Low,
    High128,
    High256,
    HighBoth,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Idle,
        Mode::Low,
        Mode::High128,
        Mode::High256,
        Mode::HighBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Low => "low",
            Mode::High128 => "high128",
            Mode::High256 => "high256",
            Mode::HighBoth => "highboth",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    /// Accepts `high128`, `high 128`, `high_128` and so on.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// Power drawn by one design in each mode it supports, in mW.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerProfile {
    pub design: String,
    pub mw: BTreeMap<Mode, f64>,
}

impl PowerProfile {
    pub fn new(design: &str, values: impl IntoIterator<Item = (Mode, f64)>) -> Self {
        Self {
            design: design.to_string(),
            mw: values.into_iter().collect(),
        }
    }

    pub fn get(&self, mode: Mode) -> Result<f64, EnergyError> {
        self.mw
            .get(&mode)
            .copied()
            .ok_or_else(|| EnergyError::MissingMode {
                design: self.design.clone(),
                mode,
            })
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        let bad = |message: String| EnergyError::InvalidProfile {
            design: self.design.clone(),
            message,
        };
        for (m, v) in &self.mw {
            if !v.is_finite() || *v < 0.0 {
                return Err(bad(format!("{m} power {v} is negative or not finite")));
            }
        }
        if let Some(idle) = self.mw.get(&Mode::Idle) {
            for (m, v) in &self.mw {
                if v < idle {
                    return Err(bad(format!("{m} power {v} is below idle power {idle}")));
                }
            }
        }
        Ok(())
    }
}

/// Share of time spent in each mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub id: u32,
    pub rates: BTreeMap<Mode, f64>,
}

impl Scenario {
    pub fn new(id: u32, rates: [f64; 5]) -> Result<Self, EnergyError> {
        let s = Self {
            id,
            rates: Mode::ALL.into_iter().zip(rates).collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn rate(&self, mode: Mode) -> f64 {
        self.rates.get(&mode).copied().unwrap_or(0.0)
    }

    /// Rates in [0, 1] summing to 1 within 0.02; printed rates such as
    /// 0.33 + 0.33 + 0.33 are rounded.
    pub fn validate(&self) -> Result<(), EnergyError> {
        let bad = |message: String| EnergyError::InvalidScenario {
            id: self.id,
            message,
        };
        for (m, r) in &self.rates {
            if !(0.0..=1.0).contains(r) {
                return Err(bad(format!("rate of {m} is {r}, outside [0, 1]")));
            }
        }
        let sum: f64 = self.rates.values().sum();
        if (sum - 1.0).abs() > SCENARIO_SUM_TOLERANCE + 1e-12 {
            return Err(bad(format!("rates sum to {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatteryModel {
    pub capacity_mah: f64,
    pub voltage_v: f64,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self {
            capacity_mah: DEFAULT_CAPACITY_MAH,
            voltage_v: DEFAULT_VOLTAGE_V,
        }
    }
}

impl BatteryModel {
    pub fn new(capacity_mah: f64, voltage_v: f64) -> Result<Self, EnergyError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(capacity_mah) {
            return Err(EnergyError::InvalidBattery(format!(
                "capacity {capacity_mah} mAh"
            )));
        }
        if !ok(voltage_v) {
            return Err(EnergyError::InvalidBattery(format!(
                "voltage {voltage_v} V"
            )));
        }
        Ok(Self {
            capacity_mah,
            voltage_v,
        })
    }

    pub fn energy_mwh(&self) -> f64 {
        self.capacity_mah * self.voltage_v
    }
}

/// Average power of `p` under scenario `s`: the rate-weighted sum of the
/// mode powers. Rates are taken as given, not renormalised.
pub fn weighted_power(p: &PowerProfile, s: &Scenario) -> Result<f64, EnergyError> {
    let mut total = 0.0;
    for (m, r) in &s.rates {
        if *r != 0.0 {
            total += r * p.get(*m)?;
        }
    }
    Ok(total)
}

pub fn battery_lifetime_h(p_mw: f64, b: &BatteryModel) -> Result<f64, EnergyError> {
    if p_mw.is_nan() || p_mw <= 0.0 {
        return Err(EnergyError::ZeroPower(p_mw));
    }
    Ok(b.energy_mwh() / p_mw)
}

/// Power of the two single designs placed side by side. The design that
/// is not running a given mode sits idle.
pub fn compose_parall(
    aes128: &PowerProfile,
    aes256: &PowerProfile,
) -> Result<PowerProfile, EnergyError> {
    let (i1, l1, h1) = (
        aes128.get(Mode::Idle)?,
        aes128.get(Mode::Low)?,
        aes128.get(Mode::High128)?,
    );
    let (i2, l2, h2) = (
        aes256.get(Mode::Idle)?,
        aes256.get(Mode::Low)?,
        aes256.get(Mode::High256)?,
    );
    Ok(PowerProfile::new(
        AES_PARALL,
        [
            (Mode::Idle, i1 + i2),
            (Mode::Low, l1 + l2),
            (Mode::High128, h1 + i2),
            (Mode::High256, i1 + h2),
            (Mode::HighBoth, h1 + h2),
        ],
    ))
}

/// Relative change of the reconfigurable design's power, in percent of the
/// reconfigurable figure. This is the convention that reproduces the
/// published per-mode percentages.
pub fn power_delta_pct(reconf_mw: f64, parall_mw: f64) -> f64 {
    (reconf_mw - parall_mw) / reconf_mw * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeComparison {
    pub mode: Mode,
    pub parall_mw: f64,
    pub reconf_mw: f64,
    pub delta_pct: f64,
    pub delta_pct_rounded: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub id: u32,
    pub parall_mw: f64,
    pub reconf_mw: f64,
    pub parall_h: f64,
    pub reconf_h: f64,
    /// Reconfigurable lifetime over parallel lifetime.
    pub lifetime_ratio: f64,
    /// Lifetime change relative to the parallel design, in percent.
    pub lifetime_delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub battery: BatteryModel,
    /// Whether the parallel profile was composed from the single designs.
    pub parall_composed: bool,
    pub parall: PowerProfile,
    pub reconf: PowerProfile,
    pub modes: Vec<ModeComparison>,
    pub scenarios: Vec<ScenarioResult>,
    pub average_lifetime_delta_pct: f64,
}

fn find<'a>(profiles: &'a [PowerProfile], design: &str) -> Option<&'a PowerProfile> {
    profiles.iter().find(|p| p.design == design)
}

/// Compares the parallel and reconfigurable designs mode by mode and
/// scenario by scenario. The parallel profile is composed from the two
/// single designs when both are given, and taken as supplied otherwise.
pub fn compare_designs(
    profiles: &[PowerProfile],
    scenarios: &[Scenario],
    battery: &BatteryModel,
) -> Result<Comparison, EnergyError> {
    for p in profiles {
        p.validate()?;
    }
    for s in scenarios {
        s.validate()?;
    }
    let (parall, parall_composed) = match (find(profiles, AES128_ST), find(profiles, AES256_ST)) {
        (Some(a), Some(b)) => (compose_parall(a, b)?, true),
        _ => (
            find(profiles, AES_PARALL)
                .cloned()
                .ok_or_else(|| EnergyError::MissingProfile(AES_PARALL.into()))?,
            false,
        ),
    };
    let reconf = find(profiles, AES_RECONF)
        .cloned()
        .ok_or_else(|| EnergyError::MissingProfile(AES_RECONF.into()))?;

    let mut modes = Vec::new();
    for m in Mode::ALL {
        let (p, r) = (parall.get(m)?, reconf.get(m)?);
        let d = power_delta_pct(r, p);
        modes.push(ModeComparison {
            mode: m,
            parall_mw: p,
            reconf_mw: r,
            delta_pct: d,
            delta_pct_rounded: d.round() as i64,
        });
    }

    let mut results = Vec::new();
    for s in scenarios {
        let pw = weighted_power(&parall, s)?;
        let rw = weighted_power(&reconf, s)?;
        let ph = battery_lifetime_h(pw, battery)?;
        let rh = battery_lifetime_h(rw, battery)?;
        results.push(ScenarioResult {
            id: s.id,
            parall_mw: pw,
            reconf_mw: rw,
            parall_h: ph,
            reconf_h: rh,
            lifetime_ratio: rh / ph,
            lifetime_delta_pct: percent_delta(rh, ph),
        });
    }
    let average = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.lifetime_delta_pct).sum::<f64>() / results.len() as f64
    };
    Ok(Comparison {
        battery: *battery,
        parall_composed,
        parall,
        reconf,
        modes,
        scenarios: results,
        average_lifetime_delta_pct: average,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct PowerRow {
    design: String,
    mode: String,
    mw: f64,
}

/// Reads `design,mode,mw` rows into one profile per design, in order of
/// first appearance.
pub fn read_power_csv(r: impl Read) -> Result<Vec<PowerProfile>, EnergyError> {
    let mut out: Vec<PowerProfile> = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    for row in rdr.deserialize() {
        let row: PowerRow = row?;
        let mode: Mode = row
            .mode
            .parse()
            .map_err(|message| EnergyError::InvalidProfile {
                design: row.design.clone(),
                message,
            })?;
        let idx = match out.iter().position(|p| p.design == row.design) {
            Some(i) => i,
            None => {
                out.push(PowerProfile::new(&row.design, []));
                out.len() - 1
            }
        };
        if out[idx].mw.insert(mode, row.mw).is_some() {
            return Err(EnergyError::InvalidProfile {
                design: row.design,
                message: format!("mode {mode} listed twice"),
            });
        }
    }
    for p in &out {
        p.validate()?;
    }
    Ok(out)
}

pub fn write_power_csv(w: impl Write, profiles: &[PowerProfile]) -> Result<(), EnergyError> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in profiles {
        for (m, v) in &p.mw {
            wtr.serialize(PowerRow {
                design: p.design.clone(),
                mode: m.to_string(),
                mw: *v,
            })?;
        }
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRow {
    id: u32,
    idle: f64,
    low: f64,
    high128: f64,
    high256: f64,
    highboth: f64,
}

/// Reads `id,idle,low,high128,high256,highboth` rows.
pub fn read_scenarios_csv(r: impl Read) -> Result<Vec<Scenario>, EnergyError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: ScenarioRow = row?;
        out.push(Scenario::new(
            row.id,
            [row.idle, row.low, row.high128, row.high256, row.highboth],
        )?);
    }
    Ok(out)
}

pub fn write_scenarios_csv(w: impl Write, scenarios: &[Scenario]) -> Result<(), EnergyError> {
    let mut wtr = csv::Writer::from_writer(w);
    for s in scenarios {
        wtr.serialize(ScenarioRow {
            id: s.id,
            idle: s.rate(Mode::Idle),
            low: s.rate(Mode::Low),
            high128: s.rate(Mode::High128),
            high256: s.rate(Mode::High256),
            highboth: s.rate(Mode::HighBoth),
        })?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct LifetimeRow<'a> {
    scenario: u32,
    design: &'a str,
    power_mw: String,
    lifetime_h: String,
}

/// One row per (scenario, design), numbers with six decimals.
pub fn write_lifetime_csv(w: impl Write, c: &Comparison) -> Result<(), EnergyError> {
    let mut wtr = csv::Writer::from_writer(w);
    for s in &c.scenarios {
        for (design, mw, h) in [
            (AES_PARALL, s.parall_mw, s.parall_h),
            (AES_RECONF, s.reconf_mw, s.reconf_h),
        ] {
            wtr.serialize(LifetimeRow {
                scenario: s.id,
                design,
                power_mw: format!("{mw:.6}"),
                lifetime_h: format!("{h:.6}"),
            })?;
        }
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PlotBar<'a> {
    design: &'a str,
    lifetime_h: f64,
}

#[derive(Debug, Serialize)]
struct PlotGroup<'a> {
    scenario: u32,
    bars: Vec<PlotBar<'a>>,
    variation_pct: f64,
}

#[derive(Debug, Serialize)]
struct Plot<'a> {
    title: String,
    battery: BatteryModel,
    groups: Vec<PlotGroup<'a>>,
    average_variation_pct: f64,
}

/// Grouped-bar data: per scenario one bar per design, plus the relative
/// change of the reconfigurable design.
pub fn lifetime_plot_json(c: &Comparison) -> Result<String, EnergyError> {
    let plot = Plot {
        title: format!("Duration of a {} mAh battery", c.battery.capacity_mah),
        battery: c.battery,
        groups: c
            .scenarios
            .iter()
            .map(|s| PlotGroup {
                scenario: s.id,
                bars: vec![
                    PlotBar {
                        design: AES_PARALL,
                        lifetime_h: s.parall_h,
                    },
                    PlotBar {
                        design: AES_RECONF,
                        lifetime_h: s.reconf_h,
                    },
                ],
                variation_pct: s.lifetime_delta_pct,
            })
            .collect(),
        average_variation_pct: c.average_lifetime_delta_pct,
    };
    let mut s = serde_json::to_string_pretty(&plot)?;
    s.push('\n');
    Ok(s)
}
