//! Point-wise plant physics for the closed-loop simulator.
//!
//! The plant holds the applied converter setpoints over a step, realizes the
//! solar devices from the actual irradiance, settles the electrical balance
//! through the grid connection, books thermal mismatch as surplus (waste
//! heat) or deficit (comfort violation), and advances the storage states.
//! Boiler fuel is re-priced from the true part-load curve, so an optimistic
//! relaxed plan pays the honest gas bill.

use super::{HubSpec, HubInitialState, GbParams};

/// Evolving plant-side state of one hub.
#[derive(Debug, Clone)]
pub struct PlantState {
    pub battery_kwh: Option<f64>,
    pub thermal_kwh: Option<f64>,
    pub chp_on: bool,
    pub chp_hours_in_state: f64,
    pub chp_prev_p_kw: f64,
}

impl PlantState {
    pub fn init(init: &HubInitialState) -> Self {
        PlantState {
            battery_kwh: init.battery_kwh,
            thermal_kwh: init.thermal_kwh,
            chp_on: init.chp.on,
            chp_hours_in_state: init.chp.hours_in_state,
            chp_prev_p_kw: init.chp.prev_p_kw,
        }
    }

    /// Controller anchor derived from the current plant state.
    pub fn as_initial(&self) -> HubInitialState {
        HubInitialState {
            battery_kwh: self.battery_kwh,
            thermal_kwh: self.thermal_kwh,
            chp: super::ChpInitial {
                on: self.chp_on,
                hours_in_state: self.chp_hours_in_state,
                prev_p_kw: self.chp_prev_p_kw,
            },
        }
    }
}

/// Setpoints held over a plant step (first step of the active plan).
#[derive(Debug, Clone, Copy, Default)]
pub struct AppliedSetpoints {
    pub hp_heat_kw: f64,
    pub gb_heat_kw: f64,
    pub chp_power_kw: f64,
    pub chp_heat_kw: f64,
    pub chp_on: bool,
    pub mchp_power_kw: f64,
    pub battery_charge_kw: f64,
    pub battery_discharge_kw: f64,
    pub thermal_charge_kw: f64,
    pub thermal_discharge_kw: f64,
    /// Sum of committed electrical exports to peers.
    pub trade_export_p_kw: f64,
    /// Sum of committed electrical imports, already scaled by the transfer
    /// efficiencies.
    pub trade_import_p_eff_kw: f64,
    pub trade_export_q_kw: f64,
    pub trade_import_q_eff_kw: f64,
}

/// Realized demand and irradiance over a plant step.
#[derive(Debug, Clone, Copy)]
pub struct RealizedStep {
    pub l_e_kw: f64,
    pub l_h_kw: f64,
    pub irradiance_kw_m2: f64,
}

/// What actually happened over a plant step.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlantRecord {
    pub grid_import_kw: f64,
    pub grid_export_kw: f64,
    pub gas_kw: f64,
    pub heat_surplus_kw: f64,
    pub heat_deficit_kw: f64,
    pub pv_kw: f64,
    pub st_power_kw: f64,
    pub st_heat_kw: f64,
    pub battery_kwh: f64,
    pub thermal_kwh: f64,
}

/// Fuel demand of the boiler at heat output `q` from the part-load curve.
/// On a segment boundary the more efficient of the two adjacent segments
/// applies (the operator picks the better mode).
pub(crate) fn boiler_fuel(gb: &GbParams, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let quarter = gb.q_max_kw / 4.0;
    let mut best = f64::INFINITY;
    for s in 0..4 {
        let lo = quarter * s as f64;
        let hi = quarter * (s + 1) as f64;
        if q >= lo - 1e-9 && q <= hi + 1e-9 {
            best = best.min(q / gb.seg_efficiency[s]);
        }
    }
    if best.is_finite() {
        best
    } else {
        // Beyond capacity (setpoints are clamped before this, so only
        // reachable through rounding): price at the top segment.
        q / gb.seg_efficiency[3]
    }
}

/// Advances one hub's plant by one step of `dt_h` hours and returns the
/// realized energy flows. The electrical balance always closes through the
/// grid; the thermal balance closes through surplus/deficit.
pub fn evaluate_plant(
    hub: &HubSpec,
    sp: &AppliedSetpoints,
    realized: &RealizedStep,
    dt_h: f64,
    state: &mut PlantState,
) -> PlantRecord {
    let mut rec = PlantRecord::default();
    let mut gen_p = 0.0;
    let mut gen_q = 0.0;
    let mut load_p = 0.0;

    if let Some(pv) = &hub.pv {
        let raw = pv.efficiency * realized.irradiance_kw_m2 * pv.area_m2;
        rec.pv_kw = raw.clamp(pv.p_min_kw, pv.p_max_kw);
        gen_p += rec.pv_kw;
    }
    if let Some(st) = &hub.st {
        let raw_p = st.efficiency * realized.irradiance_kw_m2 * st.area_m2 * st.alpha_p;
        let scale = if raw_p > st.p_max_kw && raw_p > 0.0 {
            st.p_max_kw / raw_p
        } else {
            1.0
        };
        rec.st_power_kw = raw_p * scale;
        rec.st_heat_kw =
            st.efficiency * realized.irradiance_kw_m2 * st.area_m2 * st.alpha_q * scale;
        gen_p += rec.st_power_kw;
        gen_q += rec.st_heat_kw;
    }
    if let Some(hp) = &hub.hp {
        let q = sp.hp_heat_kw.clamp(hp.q_min_kw, hp.q_max_kw);
        gen_q += q;
        load_p += q / hp.cop;
    }
    if let Some(gb) = &hub.gb {
        let q = sp.gb_heat_kw.clamp(gb.q_min_kw, gb.q_max_kw);
        gen_q += q;
        rec.gas_kw += boiler_fuel(gb, q);
    }
    if let Some(chp) = &hub.chp {
        let p = sp.chp_power_kw.clamp(0.0, chp.max_vertex_p());
        let q = sp.chp_heat_kw.clamp(0.0, chp.max_vertex_q());
        gen_p += p;
        gen_q += q;
        rec.gas_kw += p / chp.fuel_efficiency;
        let on_now = sp.chp_on || p > 1e-6;
        if on_now == state.chp_on {
            state.chp_hours_in_state += dt_h;
        } else {
            state.chp_on = on_now;
            state.chp_hours_in_state = dt_h;
        }
        state.chp_prev_p_kw = p;
    }
    if let Some(mchp) = &hub.mchp {
        let p = sp.mchp_power_kw.clamp(mchp.p_min_kw, mchp.p_max_kw);
        gen_p += p;
        gen_q += p * mchp.alpha_q / mchp.alpha_p;
        rec.gas_kw += p / mchp.fuel_efficiency;
    }

    if let Some(bat) = &hub.battery {
        let e = state.battery_kwh.unwrap_or_else(|| bat.initial_energy());
        let (e_next, ch, dc) = step_storage(
            bat,
            e,
            sp.battery_charge_kw,
            sp.battery_discharge_kw,
            dt_h,
        );
        state.battery_kwh = Some(e_next);
        rec.battery_kwh = e_next;
        gen_p += dc;
        load_p += ch;
    }
    if let Some(ts) = &hub.thermal_store {
        let e = state.thermal_kwh.unwrap_or_else(|| ts.initial_energy());
        let (e_next, ch, dc) = step_storage(
            ts,
            e,
            sp.thermal_charge_kw,
            sp.thermal_discharge_kw,
            dt_h,
        );
        state.thermal_kwh = Some(e_next);
        rec.thermal_kwh = e_next;
        gen_q += dc;
        gen_q -= ch;
    }

    // Thermal mismatch: surplus is discarded, deficit is a comfort violation.
    let heat_net =
        gen_q + sp.trade_import_q_eff_kw - sp.trade_export_q_kw - realized.l_h_kw;
    rec.heat_surplus_kw = heat_net.max(0.0);
    rec.heat_deficit_kw = (-heat_net).max(0.0);

    // Electrical mismatch settles through the grid connection.
    let need = realized.l_e_kw + load_p + sp.trade_export_p_kw
        - sp.trade_import_p_eff_kw
        - gen_p;
    rec.grid_import_kw = need.max(0.0);
    rec.grid_export_kw = (-need).max(0.0);

    rec
}

/// Clamps a charge/discharge pair to the power and energy limits and
/// advances the state of charge.
fn step_storage(
    params: &super::StorageParams,
    e: f64,
    charge_kw: f64,
    discharge_kw: f64,
    dt_h: f64,
) -> (f64, f64, f64) {
    let keep = params.retention(dt_h);
    let eta = params.cycle_eff;
    let mut ch = charge_kw.clamp(0.0, params.p_max_kw);
    let mut dc = discharge_kw.clamp(0.0, params.p_max_kw);
    let next = |ch: f64, dc: f64| keep * e + dt_h * (eta * ch - dc / eta);
    if next(ch, dc) > params.e_max_kwh {
        ch = ((params.e_max_kwh - keep * e + dt_h * dc / eta) / (dt_h * eta)).max(0.0);
    }
    if next(ch, dc) < params.e_min_kwh {
        dc = ((keep * e + dt_h * eta * ch - params.e_min_kwh) * eta / dt_h).max(0.0);
    }
    let e_next = next(ch, dc).clamp(params.e_min_kwh, params.e_max_kwh);
    (e_next, ch, dc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hubmodel::{HpParams, PvParams, StorageParams};

    fn battery() -> StorageParams {
        StorageParams {
            standby_eff: 0.999,
            cycle_eff: 0.99,
            e_min_kwh: 150.0,
            e_max_kwh: 750.0,
            p_max_kw: 200.0,
            e_init_kwh: Some(500.0),
        }
    }

    #[test]
    fn battery_charge_step() {
        // E' = 0.999 * 500 + 0.99 * 100 over one hour.
        let hub = HubSpec {
            name: "bat".into(),
            battery: Some(battery()),
            ..Default::default()
        };
        let mut state = PlantState::init(&HubInitialState::cold(&hub));
        state.battery_kwh = Some(500.0);
        let sp = AppliedSetpoints {
            battery_charge_kw: 100.0,
            ..Default::default()
        };
        let realized = RealizedStep {
            l_e_kw: 0.0,
            l_h_kw: 0.0,
            irradiance_kw_m2: 0.0,
        };
        let rec = evaluate_plant(&hub, &sp, &realized, 1.0, &mut state);
        assert!((rec.battery_kwh - 598.5).abs() < 1e-9);
        // The charge power is drawn from the grid.
        assert!((rec.grid_import_kw - 100.0).abs() < 1e-9);
    }

    #[test]
    fn extra_load_closes_through_grid() {
        let hub = HubSpec {
            name: "bare".into(),
            ..Default::default()
        };
        let mut state = PlantState::init(&HubInitialState::cold(&hub));
        let sp = AppliedSetpoints::default();
        let planned = RealizedStep {
            l_e_kw: 20.0,
            l_h_kw: 0.0,
            irradiance_kw_m2: 0.0,
        };
        let base = evaluate_plant(&hub, &sp, &planned, 0.25, &mut state);
        let bumped = RealizedStep {
            l_e_kw: 25.0,
            ..planned
        };
        let rec = evaluate_plant(&hub, &sp, &bumped, 0.25, &mut state);
        assert!((rec.grid_import_kw - base.grid_import_kw - 5.0).abs() < 1e-9);
    }

    #[test]
    fn over_production_becomes_heat_surplus() {
        let hub = HubSpec {
            name: "hp".into(),
            hp: Some(HpParams {
                cop: 4.5,
                q_min_kw: 0.0,
                q_max_kw: 50.0,
            }),
            ..Default::default()
        };
        let mut state = PlantState::init(&HubInitialState::cold(&hub));
        let sp = AppliedSetpoints {
            hp_heat_kw: 10.0,
            ..Default::default()
        };
        let realized = RealizedStep {
            l_e_kw: 0.0,
            l_h_kw: 7.0,
            irradiance_kw_m2: 0.0,
        };
        let rec = evaluate_plant(&hub, &sp, &realized, 0.25, &mut state);
        assert!((rec.heat_surplus_kw - 3.0).abs() < 1e-9);
        assert!(rec.heat_deficit_kw.abs() < 1e-12);
        // The pump's electricity shows up as grid import.
        assert!((rec.grid_import_kw - 10.0 / 4.5).abs() < 1e-9);
    }

    #[test]
    fn storage_clamps_at_energy_bounds() {
        let hub = HubSpec {
            name: "bat".into(),
            battery: Some(battery()),
            ..Default::default()
        };
        let mut state = PlantState::init(&HubInitialState::cold(&hub));
        state.battery_kwh = Some(749.0);
        let sp = AppliedSetpoints {
            battery_charge_kw: 200.0,
            ..Default::default()
        };
        let realized = RealizedStep {
            l_e_kw: 0.0,
            l_h_kw: 0.0,
            irradiance_kw_m2: 0.0,
        };
        let rec = evaluate_plant(&hub, &sp, &realized, 1.0, &mut state);
        assert!(rec.battery_kwh <= 750.0 + 1e-9);
        // Only the admissible share of the charge was drawn.
        assert!(rec.grid_import_kw < 200.0);
    }

    #[test]
    fn pv_realizes_from_actual_irradiance() {
        let hub = HubSpec {
            name: "pv".into(),
            pv: Some(PvParams {
                efficiency: 0.15,
                area_m2: 8400.0,
                p_min_kw: 0.0,
                p_max_kw: 2500.0,
            }),
            ..Default::default()
        };
        let mut state = PlantState::init(&HubInitialState::cold(&hub));
        let sp = AppliedSetpoints::default();
        let realized = RealizedStep {
            l_e_kw: 0.0,
            l_h_kw: 0.0,
            irradiance_kw_m2: 0.8,
        };
        let rec = evaluate_plant(&hub, &sp, &realized, 0.25, &mut state);
        assert!((rec.pv_kw - 1008.0).abs() < 1e-9);
        assert!((rec.grid_export_kw - 1008.0).abs() < 1e-9);
    }

    #[test]
    fn boiler_fuel_uses_better_segment_on_boundary() {
        let gb = GbParams {
            seg_efficiency: [0.59, 0.83, 0.9, 0.82],
            q_min_kw: 0.0,
            q_max_kw: 350.0,
        };
        // Exactly at the 25 % boundary both segments are valid; the cheaper
        // (more efficient) one applies.
        let f = boiler_fuel(&gb, 87.5);
        assert!((f - 87.5 / 0.83).abs() < 1e-9);
        assert!((boiler_fuel(&gb, 350.0) - 350.0 / 0.82).abs() < 1e-9);
        assert_eq!(boiler_fuel(&gb, 0.0), 0.0);
    }
}
