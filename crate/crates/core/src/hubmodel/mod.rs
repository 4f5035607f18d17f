//! Energy-hub device models.
//!
//! Each hub couples an electrical and a thermal carrier through converters
//! (PV, solar-thermal, heat pump, gas boiler, CHP, micro-CHP) and storages
//! (battery, hot-water tank). [`build`] turns a hub into sparse solver
//! constraints over a prediction grid; [`plant`] evaluates the same device
//! physics point-wise for the closed-loop simulator.

mod build;
mod plant;

pub use build::{
    build_coupling_constraints, build_hub_constraints, hub_stage_cost, BuildError, ChpVars,
    CouplingSide, GbVars, HubVars, PairTradeVars, StorageVars,
};
pub use plant::{evaluate_plant, AppliedSetpoints, PlantRecord, PlantState, RealizedStep};

use serde::{Deserialize, Serialize};

/// Tolerance for output-share sums (electrical + thermal shares of ST and
/// micro-CHP must sum to one).
pub const SHARE_SUM_TOL: f64 = 1e-9;

/// A single validation finding with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(issues: &mut Vec<ValidationIssue>, path: &str, field: &str, message: String) {
    issues.push(ValidationIssue {
        path: format!("{path}.{field}"),
        message,
    });
}

fn check_unit_interval(issues: &mut Vec<ValidationIssue>, path: &str, field: &str, v: f64) {
    if !(v > 0.0 && v <= 1.0) {
        issue(issues, path, field, format!("must be in (0, 1], got {v}"));
    }
}

fn check_bounds(issues: &mut Vec<ValidationIssue>, path: &str, field: &str, lo: f64, hi: f64) {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        issue(issues, path, field, format!("bounds [{lo}, {hi}] are not ordered"));
    }
}

/// Photovoltaic array: fixed-efficiency conversion of irradiance over a
/// panel area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PvParams {
    pub efficiency: f64,
    pub area_m2: f64,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
}

impl PvParams {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        check_unit_interval(issues, path, "efficiency", self.efficiency);
        if self.area_m2 <= 0.0 {
            issue(issues, path, "area_m2", format!("must be positive, got {}", self.area_m2));
        }
        check_bounds(issues, path, "p_min/p_max", self.p_min_kw, self.p_max_kw);
        if self.p_min_kw < 0.0 {
            issue(issues, path, "p_min_kw", "must be nonnegative".into());
        }
    }
}

/// Solar-thermal collector with fixed electrical/thermal output shares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StParams {
    pub efficiency: f64,
    pub area_m2: f64,
    pub alpha_p: f64,
    pub alpha_q: f64,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
}

impl StParams {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>, allow_unnormalized: bool) {
        check_unit_interval(issues, path, "efficiency", self.efficiency);
        if self.area_m2 <= 0.0 {
            issue(issues, path, "area_m2", format!("must be positive, got {}", self.area_m2));
        }
        check_bounds(issues, path, "p_min/p_max", self.p_min_kw, self.p_max_kw);
        if !allow_unnormalized && (self.alpha_p + self.alpha_q - 1.0).abs() > SHARE_SUM_TOL {
            issue(
                issues,
                path,
                "alpha_p/alpha_q",
                format!("shares must sum to 1, got {}", self.alpha_p + self.alpha_q),
            );
        }
    }
}

/// Heat pump: thermal output proportional to electrical input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HpParams {
    pub cop: f64,
    pub q_min_kw: f64,
    pub q_max_kw: f64,
}

impl HpParams {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        if self.cop <= 0.0 {
            issue(issues, path, "cop", format!("must be positive, got {}", self.cop));
        }
        check_bounds(issues, path, "q_min/q_max", self.q_min_kw, self.q_max_kw);
    }
}

/// Gas boiler with part-load efficiencies per load quartile
/// (0-25 %, 25-50 %, 50-75 %, 75-100 %).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbParams {
    pub seg_efficiency: [f64; 4],
    pub q_min_kw: f64,
    pub q_max_kw: f64,
}

impl GbParams {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        for (s, &eta) in self.seg_efficiency.iter().enumerate() {
            if !(eta > 0.0 && eta <= 1.0) {
                issue(
                    issues,
                    path,
                    "seg_efficiency",
                    format!("segment {} efficiency {eta} outside (0, 1]", s + 1),
                );
            }
        }
        check_bounds(issues, path, "q_min/q_max", self.q_min_kw, self.q_max_kw);
    }
}

/// CHP unit: operating region is the convex hull of four (power, heat)
/// vertices scaled by a binary commitment, with ramp limits (kW per hour)
/// and minimum up/down times (hours).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChpParams {
    pub fuel_efficiency: f64,
    pub vertex_p_kw: [f64; 4],
    pub vertex_q_kw: [f64; 4],
    pub ramp_up_kw_per_h: f64,
    pub ramp_down_kw_per_h: f64,
    pub min_up_h: f64,
    pub min_down_h: f64,
}

impl ChpParams {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        check_unit_interval(issues, path, "fuel_efficiency", self.fuel_efficiency);
        if self.ramp_up_kw_per_h < 0.0 || self.ramp_down_kw_per_h < 0.0 {
            issue(issues, path, "ramp", "ramp limits must be nonnegative".into());
        }
        if self.min_up_h < 0.0 || self.min_down_h < 0.0 {
            issue(issues, path, "min_up/min_down", "minimum times must be nonnegative".into());
        }
        if self.vertex_p_kw.iter().chain(&self.vertex_q_kw).any(|v| !v.is_finite()) {
            issue(issues, path, "vertices", "vertex coordinates must be finite".into());
        }
    }

    pub fn max_vertex_p(&self) -> f64 {
        self.vertex_p_kw.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_vertex_q(&self) -> f64 {
        self.vertex_q_kw.iter().copied().fold(0.0, f64::max)
    }
}

/// Micro-CHP with fixed electrical/thermal output shares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MchpParams {
    pub fuel_efficiency: f64,
    pub alpha_p: f64,
    pub alpha_q: f64,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
}

impl MchpParams {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>, allow_unnormalized: bool) {
        check_unit_interval(issues, path, "fuel_efficiency", self.fuel_efficiency);
        check_bounds(issues, path, "p_min/p_max", self.p_min_kw, self.p_max_kw);
        if self.alpha_p <= 0.0 {
            issue(issues, path, "alpha_p", "electrical share must be positive".into());
        }
        if !allow_unnormalized && (self.alpha_p + self.alpha_q - 1.0).abs() > SHARE_SUM_TOL {
            issue(
                issues,
                path,
                "alpha_p/alpha_q",
                format!("shares must sum to 1, got {}", self.alpha_p + self.alpha_q),
            );
        }
    }
}

/// Storage (battery or hot-water tank): scalar state of charge with standby
/// decay per hour and a cycle efficiency on charge/discharge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StorageParams {
    /// Standby efficiency per hour (fraction of energy kept).
    pub standby_eff: f64,
    /// Cycle efficiency applied on charge and discharge.
    pub cycle_eff: f64,
    pub e_min_kwh: f64,
    pub e_max_kwh: f64,
    pub p_max_kw: f64,
    /// Initial state of charge; defaults to the midpoint of the energy band.
    pub e_init_kwh: Option<f64>,
}

impl StorageParams {
    pub fn initial_energy(&self) -> f64 {
        self.e_init_kwh
            .unwrap_or(0.5 * (self.e_min_kwh + self.e_max_kwh))
    }

    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        check_unit_interval(issues, path, "standby_eff", self.standby_eff);
        check_unit_interval(issues, path, "cycle_eff", self.cycle_eff);
        check_bounds(issues, path, "e_min/e_max", self.e_min_kwh, self.e_max_kwh);
        if self.p_max_kw < 0.0 {
            issue(issues, path, "p_max_kw", "must be nonnegative".into());
        }
        let e0 = self.initial_energy();
        if !(self.e_min_kwh <= e0 && e0 <= self.e_max_kwh) {
            issue(
                issues,
                path,
                "e_init_kwh",
                format!(
                    "initial energy {e0} outside [{}, {}]",
                    self.e_min_kwh, self.e_max_kwh
                ),
            );
        }
    }

    /// Standby retention over a step of `dt_h` hours.
    pub fn retention(&self, dt_h: f64) -> f64 {
        self.standby_eff.powf(dt_h)
    }
}

/// One energy hub: a named bundle of optional devices.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HubSpec {
    pub name: String,
    pub pv: Option<PvParams>,
    pub st: Option<StParams>,
    pub hp: Option<HpParams>,
    pub gb: Option<GbParams>,
    pub chp: Option<ChpParams>,
    pub mchp: Option<MchpParams>,
    pub battery: Option<StorageParams>,
    pub thermal_store: Option<StorageParams>,
}

impl HubSpec {
    pub fn has_gas_device(&self) -> bool {
        self.gb.is_some() || self.chp.is_some() || self.mchp.is_some()
    }

    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>, allow_unnormalized: bool) {
        if let Some(d) = &self.pv {
            d.validate(&format!("{path}.pv"), issues);
        }
        if let Some(d) = &self.st {
            d.validate(&format!("{path}.st"), issues, allow_unnormalized);
        }
        if let Some(d) = &self.hp {
            d.validate(&format!("{path}.hp"), issues);
        }
        if let Some(d) = &self.gb {
            d.validate(&format!("{path}.gb"), issues);
        }
        if let Some(d) = &self.chp {
            d.validate(&format!("{path}.chp"), issues);
        }
        if let Some(d) = &self.mchp {
            d.validate(&format!("{path}.mchp"), issues, allow_unnormalized);
        }
        if let Some(d) = &self.battery {
            d.validate(&format!("{path}.battery"), issues);
        }
        if let Some(d) = &self.thermal_store {
            d.validate(&format!("{path}.thermal_store"), issues);
        }
    }
}

/// Line limits and transfer efficiencies of one inter-hub connection.
/// Limits apply per direction; a zero limit forbids transfer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinkParams {
    pub kappa_e_kw: f64,
    pub kappa_h_kw: f64,
    pub zeta_e: f64,
    pub zeta_h: f64,
}

impl LinkParams {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        if self.kappa_e_kw < 0.0 || self.kappa_h_kw < 0.0 {
            issue(issues, path, "kappa", "line limits must be nonnegative".into());
        }
        check_unit_interval(issues, path, "zeta_e", self.zeta_e);
        check_unit_interval(issues, path, "zeta_h", self.zeta_h);
    }
}

/// Tariffs: peak/off-peak electricity import, flat feed-in, gas and network
/// usage fees (all CHF/kWh). The import-side network fee is paid by the hub
/// receiving a transfer; the heat-transfer fee defaults to zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tariffs {
    pub import_peak: f64,
    pub import_offpeak: f64,
    /// Peak window within a day, minutes since midnight (start inclusive,
    /// end exclusive).
    pub peak_start_min: i64,
    pub peak_end_min: i64,
    pub feed_in: f64,
    pub gas: f64,
    pub trade_fee_e: f64,
    pub trade_fee_h: f64,
}

impl Default for Tariffs {
    fn default() -> Self {
        Tariffs {
            import_peak: 0.27,
            import_offpeak: 0.22,
            peak_start_min: 7 * 60,
            peak_end_min: 20 * 60,
            feed_in: 0.12,
            gas: 0.115,
            trade_fee_e: 0.02,
            trade_fee_h: 0.0,
        }
    }
}

impl Tariffs {
    /// Import price at an absolute time (minutes from simulation start,
    /// which is taken to be midnight).
    pub fn import_price(&self, abs_min: i64) -> f64 {
        let mod_day = abs_min.rem_euclid(24 * 60);
        if mod_day >= self.peak_start_min && mod_day < self.peak_end_min {
            self.import_peak
        } else {
            self.import_offpeak
        }
    }

    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        for (f, v) in [
            ("import_peak", self.import_peak),
            ("import_offpeak", self.import_offpeak),
            ("feed_in", self.feed_in),
            ("gas", self.gas),
            ("trade_fee_e", self.trade_fee_e),
            ("trade_fee_h", self.trade_fee_h),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                issue(issues, path, f, format!("must be a nonnegative price, got {v}"));
            }
        }
        if !(0..=1440).contains(&self.peak_start_min) || !(0..=1440).contains(&self.peak_end_min) {
            issue(issues, path, "peak window", "must lie within one day".into());
        }
    }
}

/// The hub network: hubs, pairwise links and shared economic parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub hubs: Vec<HubSpec>,
    /// Links keyed by canonical hub index pairs (i < j).
    pub links: std::collections::BTreeMap<(usize, usize), LinkParams>,
    pub tariffs: Tariffs,
    /// Penalty on thermal surplus/deficit slack (CHF/kWh).
    pub heat_slack_penalty: f64,
    /// Escape hatch for output shares that deliberately do not sum to one.
    #[serde(default)]
    pub allow_unnormalized_shares: bool,
}

impl NetworkSpec {
    pub fn n_hubs(&self) -> usize {
        self.hubs.len()
    }

    pub fn link(&self, a: usize, b: usize) -> Option<&LinkParams> {
        self.links.get(&canonical_pair(a, b))
    }

    pub fn set_link(&mut self, a: usize, b: usize, link: LinkParams) {
        self.links.insert(canonical_pair(a, b), link);
    }

    /// Canonical (i < j) pairs that have a link entry, in deterministic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.links.keys().copied().collect()
    }

    pub fn validate(&self, issues: &mut Vec<ValidationIssue>) {
        for (h, hub) in self.hubs.iter().enumerate() {
            let path = format!("hub[{}]({})", h, hub.name);
            hub.validate(&path, issues, self.allow_unnormalized_shares);
        }
        for (&(i, j), link) in &self.links {
            let path = format!("link[{i}-{j}]");
            if i >= j || j >= self.hubs.len() {
                issue(issues, &path, "pair", "link endpoints must be distinct valid hubs".into());
            }
            link.validate(&path, issues);
        }
        self.tariffs.validate("tariffs", issues);
        if !(self.heat_slack_penalty.is_finite() && self.heat_slack_penalty > 0.0) {
            issues.push(ValidationIssue {
                path: "heat_slack_penalty".into(),
                message: "must be positive".into(),
            });
        }
    }
}

pub fn canonical_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// CHP commitment history carried across receding-horizon re-solves.
#[derive(Debug, Clone, Copy)]
pub struct ChpInitial {
    pub on: bool,
    /// Hours already spent in the current on/off state.
    pub hours_in_state: f64,
    pub prev_p_kw: f64,
}

/// Plant-side state a controller needs to anchor its horizon.
#[derive(Debug, Clone)]
pub struct HubInitialState {
    pub battery_kwh: Option<f64>,
    pub thermal_kwh: Option<f64>,
    pub chp: ChpInitial,
}

impl HubInitialState {
    /// Cold start: storages at their configured initial energy, CHP off and
    /// past its minimum down time.
    pub fn cold(hub: &HubSpec) -> Self {
        HubInitialState {
            battery_kwh: hub.battery.as_ref().map(|b| b.initial_energy()),
            thermal_kwh: hub.thermal_store.as_ref().map(|t| t.initial_energy()),
            chp: ChpInitial {
                on: false,
                hours_in_state: hub.chp.as_ref().map_or(0.0, |c| c.min_down_h),
                prev_p_kw: 0.0,
            },
        }
    }
}

/// Per-step forecast seen by a hub controller.
#[derive(Debug, Clone, Default)]
pub struct HubForecast {
    pub l_e_kw: Vec<f64>,
    pub l_h_kw: Vec<f64>,
    pub irradiance_kw_m2: Vec<f64>,
}
