//! Hub constraints as solver fragments.
//!
//! `build_hub_constraints` appends one hub's devices, storage dynamics and
//! carrier balances to a shared problem; `build_coupling_constraints` creates
//! the pairwise trade variables with their line limits; `hub_stage_cost`
//! attaches the economic objective. A controller composes these fragments
//! into a single-hub problem, the monolithic network problem, or a consensus
//! subproblem with local trade copies — the balance structure is identical in
//! all three, only the trade variable handles differ.

use thiserror::Error;

use crate::milp::{MilpProblem, Relation, VarId};
use crate::timegrid::TimeGrid;

use super::{
    ChpParams, HubForecast, HubInitialState, HubSpec, NetworkSpec, Tariffs,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("hub {hub}: {series} has {got} samples but the grid has {expected} steps")]
    ForecastLength {
        hub: String,
        series: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("hub {hub}: {series}[{step}] is not finite")]
    NonFiniteForecast {
        hub: String,
        series: &'static str,
        step: usize,
    },
    #[error("price schedule has {got} entries but the grid has {expected} steps")]
    PriceLength { expected: usize, got: usize },
}

#[derive(Debug, Clone)]
pub struct StorageVars {
    /// Energy at the end of each step.
    pub energy: Vec<VarId>,
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct GbVars {
    pub heat: Vec<VarId>,
    pub fuel: Vec<VarId>,
    pub seg_heat: [Vec<VarId>; 4],
    pub seg_on: [Vec<VarId>; 4],
}

#[derive(Debug, Clone)]
pub struct ChpVars {
    pub power: Vec<VarId>,
    pub heat: Vec<VarId>,
    pub fuel: Vec<VarId>,
    pub weight: [Vec<VarId>; 4],
    pub on: Vec<VarId>,
    pub start: Vec<VarId>,
    pub stop: Vec<VarId>,
}

/// Handles of every variable a hub fragment owns, per step.
#[derive(Debug, Clone, Default)]
pub struct HubVars {
    pub pv_power: Option<Vec<VarId>>,
    pub st_power: Option<Vec<VarId>>,
    pub st_heat: Option<Vec<VarId>>,
    pub hp_power: Option<Vec<VarId>>,
    pub hp_heat: Option<Vec<VarId>>,
    pub gb: Option<GbVars>,
    pub chp: Option<ChpVars>,
    pub mchp_power: Option<Vec<VarId>>,
    pub mchp_heat: Option<Vec<VarId>>,
    pub mchp_fuel: Option<Vec<VarId>>,
    pub battery: Option<StorageVars>,
    pub thermal: Option<StorageVars>,
    pub grid_import: Vec<VarId>,
    pub grid_export: Vec<VarId>,
    pub gas_total: Option<Vec<VarId>>,
    pub heat_surplus: Vec<VarId>,
    pub heat_deficit: Vec<VarId>,
}

/// Trade variables of one canonical pair (i < j): both directions of both
/// carriers over the grid.
#[derive(Debug, Clone)]
pub struct PairTradeVars {
    pub i: usize,
    pub j: usize,
    pub p_ij: Vec<VarId>,
    pub p_ji: Vec<VarId>,
    pub q_ij: Vec<VarId>,
    pub q_ji: Vec<VarId>,
}

impl PairTradeVars {
    /// The four component series in a fixed order (electrical i->j, j->i,
    /// thermal i->j, j->i); the order also defines wire and file layouts.
    pub fn components(&self) -> [&Vec<VarId>; 4] {
        [&self.p_ij, &self.p_ji, &self.q_ij, &self.q_ji]
    }
}

/// One hub's view of one of its links, orientation resolved: `export_*` flow
/// out of the hub, `import_*` flow in (scaled by the transfer efficiency in
/// the balance).
#[derive(Debug, Clone)]
pub struct CouplingSide<'a> {
    pub peer: usize,
    pub export_p: &'a [VarId],
    pub import_p: &'a [VarId],
    pub export_q: &'a [VarId],
    pub import_q: &'a [VarId],
    pub zeta_e: f64,
    pub zeta_h: f64,
}

impl<'a> CouplingSide<'a> {
    /// Resolves the orientation of `pair` from hub `h`'s perspective.
    pub fn for_hub(h: usize, pair: &'a PairTradeVars, zeta_e: f64, zeta_h: f64) -> Self {
        if h == pair.i {
            CouplingSide {
                peer: pair.j,
                export_p: &pair.p_ij,
                import_p: &pair.p_ji,
                export_q: &pair.q_ij,
                import_q: &pair.q_ji,
                zeta_e,
                zeta_h,
            }
        } else {
            debug_assert_eq!(h, pair.j);
            CouplingSide {
                peer: pair.i,
                export_p: &pair.p_ji,
                import_p: &pair.p_ij,
                export_q: &pair.q_ji,
                import_q: &pair.q_ij,
                zeta_e,
                zeta_h,
            }
        }
    }
}

fn check_series(
    hub: &HubSpec,
    series: &'static str,
    values: &[f64],
    n: usize,
) -> Result<(), BuildError> {
    if values.len() != n {
        return Err(BuildError::ForecastLength {
            hub: hub.name.clone(),
            series,
            expected: n,
            got: values.len(),
        });
    }
    for (k, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(BuildError::NonFiniteForecast {
                hub: hub.name.clone(),
                series,
                step: k,
            });
        }
    }
    Ok(())
}

fn add_binary_or_relaxed(p: &mut MilpProblem, relax: bool) -> VarId {
    if relax {
        p.add_var(0.0, 1.0)
    } else {
        p.add_binary()
    }
}

/// Elapsed hours between the starts of steps `from` and `to` of the grid.
fn elapsed_h(grid: &TimeGrid, from: usize, to: usize) -> f64 {
    (grid.step(to).offset_min - grid.step(from).offset_min) as f64 / 60.0
}

/// Appends one hub's device, storage and balance constraints to `p`.
///
/// With `coupling` entries, the balances include the given trade variables
/// (either the network's shared trade variables or the hub's local copies).
/// `relax_binaries` builds the continuous relaxation of the boiler segment
/// and CHP commitment variables.
pub fn build_hub_constraints(
    p: &mut MilpProblem,
    hub: &HubSpec,
    grid: &TimeGrid,
    forecast: &HubForecast,
    init: &HubInitialState,
    coupling: &[CouplingSide],
    relax_binaries: bool,
) -> Result<HubVars, BuildError> {
    let n = grid.len();
    check_series(hub, "electric load", &forecast.l_e_kw, n)?;
    check_series(hub, "heat load", &forecast.l_h_kw, n)?;
    if hub.pv.is_some() || hub.st.is_some() {
        check_series(hub, "irradiance", &forecast.irradiance_kw_m2, n)?;
    }

    let mut vars = HubVars::default();

    // Solar conversion: output pinned to the irradiance forecast.
    if let Some(pv) = &hub.pv {
        let cols: Vec<VarId> = (0..n).map(|_| p.add_var(pv.p_min_kw, pv.p_max_kw)).collect();
        for k in 0..n {
            let yield_kw = pv.efficiency * forecast.irradiance_kw_m2[k] * pv.area_m2;
            p.add_row(Relation::Eq, yield_kw, &[(cols[k], 1.0)]);
        }
        vars.pv_power = Some(cols);
    }
    if let Some(st) = &hub.st {
        let pw: Vec<VarId> = (0..n).map(|_| p.add_var(st.p_min_kw, st.p_max_kw)).collect();
        let qw: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
        for k in 0..n {
            let total = st.efficiency * forecast.irradiance_kw_m2[k] * st.area_m2;
            p.add_row(Relation::Eq, total * st.alpha_p, &[(pw[k], 1.0)]);
            p.add_row(Relation::Eq, total * st.alpha_q, &[(qw[k], 1.0)]);
        }
        vars.st_power = Some(pw);
        vars.st_heat = Some(qw);
    }

    if let Some(hp) = &hub.hp {
        let pw: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
        let qw: Vec<VarId> = (0..n).map(|_| p.add_var(hp.q_min_kw, hp.q_max_kw)).collect();
        for k in 0..n {
            p.add_row(Relation::Eq, 0.0, &[(qw[k], 1.0), (pw[k], -hp.cop)]);
        }
        vars.hp_power = Some(pw);
        vars.hp_heat = Some(qw);
    }

    if let Some(gb) = &hub.gb {
        let heat: Vec<VarId> = (0..n).map(|_| p.add_var(gb.q_min_kw, gb.q_max_kw)).collect();
        let fuel: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
        let seg_heat: [Vec<VarId>; 4] = std::array::from_fn(|_| {
            (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect()
        });
        let seg_on: [Vec<VarId>; 4] =
            std::array::from_fn(|_| (0..n).map(|_| add_binary_or_relaxed(p, relax_binaries)).collect());
        for k in 0..n {
            // At most one active load segment; heat within the segment's
            // quartile of capacity; fuel from the segment efficiency.
            let one_hot: Vec<(VarId, f64)> = (0..4).map(|s| (seg_on[s][k], 1.0)).collect();
            p.add_row(Relation::Le, 1.0, &one_hot);
            for s in 0..4 {
                let hi = (s as f64 + 1.0) / 4.0 * gb.q_max_kw;
                let lo = s as f64 / 4.0 * gb.q_max_kw;
                p.add_row(Relation::Le, 0.0, &[(seg_heat[s][k], 1.0), (seg_on[s][k], -hi)]);
                p.add_row(Relation::Ge, 0.0, &[(seg_heat[s][k], 1.0), (seg_on[s][k], -lo)]);
            }
            let mut q_sum: Vec<(VarId, f64)> = vec![(heat[k], 1.0)];
            let mut f_sum: Vec<(VarId, f64)> = vec![(fuel[k], 1.0)];
            for s in 0..4 {
                q_sum.push((seg_heat[s][k], -1.0));
                f_sum.push((seg_heat[s][k], -1.0 / gb.seg_efficiency[s]));
            }
            p.add_row(Relation::Eq, 0.0, &q_sum);
            p.add_row(Relation::Eq, 0.0, &f_sum);
        }
        vars.gb = Some(GbVars {
            heat,
            fuel,
            seg_heat,
            seg_on,
        });
    }

    if let Some(chp) = &hub.chp {
        vars.chp = Some(build_chp(p, chp, grid, init, relax_binaries));
    }

    if let Some(mchp) = &hub.mchp {
        let pw: Vec<VarId> = (0..n).map(|_| p.add_var(mchp.p_min_kw, mchp.p_max_kw)).collect();
        let qw: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
        let fw: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
        for k in 0..n {
            // Output shares and fuel efficiency tie heat and fuel to power.
            p.add_row(Relation::Eq, 0.0, &[(qw[k], mchp.alpha_p), (pw[k], -mchp.alpha_q)]);
            p.add_row(Relation::Eq, 0.0, &[(pw[k], 1.0), (fw[k], -mchp.fuel_efficiency)]);
        }
        vars.mchp_power = Some(pw);
        vars.mchp_heat = Some(qw);
        vars.mchp_fuel = Some(fw);
    }

    if let Some(params) = &hub.battery {
        vars.battery = Some(build_storage(p, params, grid, init.battery_kwh));
    }
    if let Some(params) = &hub.thermal_store {
        vars.thermal = Some(build_storage(p, params, grid, init.thermal_kwh));
    }

    vars.grid_import = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
    vars.grid_export = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
    vars.heat_surplus = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
    vars.heat_deficit = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();

    // Total gas import, present only when a gas device exists.
    if hub.has_gas_device() {
        let gas: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
        for k in 0..n {
            let mut row: Vec<(VarId, f64)> = vec![(gas[k], 1.0)];
            if let Some(gb) = &vars.gb {
                row.push((gb.fuel[k], -1.0));
            }
            if let Some(chp) = &vars.chp {
                row.push((chp.fuel[k], -1.0));
            }
            if let Some(f) = &vars.mchp_fuel {
                row.push((f[k], -1.0));
            }
            p.add_row(Relation::Eq, 0.0, &row);
        }
        vars.gas_total = Some(gas);
    }

    // Carrier balances. Electrical: converter output plus grid exchange,
    // storage exchange and (efficiency-scaled) imports meets the load.
    // Thermal: likewise, made soft by nonnegative surplus/deficit slacks.
    for k in 0..n {
        let mut e_row: Vec<(VarId, f64)> = Vec::new();
        let mut h_row: Vec<(VarId, f64)> = Vec::new();
        if let Some(v) = &vars.pv_power {
            e_row.push((v[k], 1.0));
        }
        if let Some(v) = &vars.st_power {
            e_row.push((v[k], 1.0));
        }
        if let Some(v) = &vars.chp {
            e_row.push((v.power[k], 1.0));
            h_row.push((v.heat[k], 1.0));
        }
        if let Some(v) = &vars.mchp_power {
            e_row.push((v[k], 1.0));
        }
        if let Some(v) = &vars.hp_power {
            e_row.push((v[k], -1.0));
        }
        e_row.push((vars.grid_import[k], 1.0));
        e_row.push((vars.grid_export[k], -1.0));
        if let Some(b) = &vars.battery {
            e_row.push((b.discharge[k], 1.0));
            e_row.push((b.charge[k], -1.0));
        }
        if let Some(v) = &vars.st_heat {
            h_row.push((v[k], 1.0));
        }
        if let Some(gb) = &vars.gb {
            h_row.push((gb.heat[k], 1.0));
        }
        if let Some(v) = &vars.mchp_heat {
            h_row.push((v[k], 1.0));
        }
        if let Some(v) = &vars.hp_heat {
            h_row.push((v[k], 1.0));
        }
        if let Some(t) = &vars.thermal {
            h_row.push((t.discharge[k], 1.0));
            h_row.push((t.charge[k], -1.0));
        }
        for side in coupling {
            e_row.push((side.import_p[k], side.zeta_e));
            e_row.push((side.export_p[k], -1.0));
            h_row.push((side.import_q[k], side.zeta_h));
            h_row.push((side.export_q[k], -1.0));
        }
        h_row.push((vars.heat_deficit[k], 1.0));
        h_row.push((vars.heat_surplus[k], -1.0));
        p.add_row(Relation::Eq, forecast.l_e_kw[k], &e_row);
        p.add_row(Relation::Eq, forecast.l_h_kw[k], &h_row);
    }

    Ok(vars)
}

fn build_storage(
    p: &mut MilpProblem,
    params: &super::StorageParams,
    grid: &TimeGrid,
    initial: Option<f64>,
) -> StorageVars {
    let n = grid.len();
    let e0 = initial.unwrap_or_else(|| params.initial_energy());
    let energy: Vec<VarId> = (0..n)
        .map(|_| p.add_var(params.e_min_kwh, params.e_max_kwh))
        .collect();
    let charge: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, params.p_max_kw)).collect();
    let discharge: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, params.p_max_kw)).collect();
    let eta = params.cycle_eff;
    for k in 0..n {
        let dt = grid.step(k).duration_h();
        let keep = params.retention(dt);
        // E[k] = keep * E[k-1] + dt * (eta * charge - discharge / eta)
        let mut row: Vec<(VarId, f64)> = vec![
            (energy[k], 1.0),
            (charge[k], -dt * eta),
            (discharge[k], dt / eta),
        ];
        let rhs = if k == 0 {
            keep * e0
        } else {
            row.push((energy[k - 1], -keep));
            0.0
        };
        p.add_row(Relation::Eq, rhs, &row);
    }
    StorageVars {
        energy,
        charge,
        discharge,
    }
}

fn build_chp(
    p: &mut MilpProblem,
    chp: &ChpParams,
    grid: &TimeGrid,
    init: &HubInitialState,
    relax: bool,
) -> ChpVars {
    let n = grid.len();
    let power: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, chp.max_vertex_p())).collect();
    let heat: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, chp.max_vertex_q())).collect();
    let fuel: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, f64::INFINITY)).collect();
    let weight: [Vec<VarId>; 4] =
        std::array::from_fn(|_| (0..n).map(|_| p.add_var(0.0, 1.0)).collect());
    let on: Vec<VarId> = (0..n).map(|_| add_binary_or_relaxed(p, relax)).collect();
    // Start/stop indicators are implied integral by the commitment binaries.
    let start: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, 1.0)).collect();
    let stop: Vec<VarId> = (0..n).map(|_| p.add_var(0.0, 1.0)).collect();

    let hist = init.chp;
    // Carry-over: a unit inside its minimum up (down) window stays on (off).
    let forced_hours = if hist.on {
        (chp.min_up_h - hist.hours_in_state).max(0.0)
    } else {
        (chp.min_down_h - hist.hours_in_state).max(0.0)
    };
    if forced_hours > 0.0 {
        for k in 0..n {
            if elapsed_h(grid, 0, k) < forced_hours {
                let fixed = if hist.on { 1.0 } else { 0.0 };
                p.set_bounds(on[k], fixed, fixed);
            } else {
                break;
            }
        }
    }

    let big_m = chp.max_vertex_p();
    for k in 0..n {
        // Convex combination of the operating vertices, scaled by commitment.
        let mut p_row: Vec<(VarId, f64)> = vec![(power[k], 1.0)];
        let mut q_row: Vec<(VarId, f64)> = vec![(heat[k], 1.0)];
        let mut b_row: Vec<(VarId, f64)> = vec![(on[k], 1.0)];
        for v in 0..4 {
            p_row.push((weight[v][k], -chp.vertex_p_kw[v]));
            q_row.push((weight[v][k], -chp.vertex_q_kw[v]));
            b_row.push((weight[v][k], -1.0));
        }
        p.add_row(Relation::Eq, 0.0, &p_row);
        p.add_row(Relation::Eq, 0.0, &q_row);
        p.add_row(Relation::Eq, 0.0, &b_row);
        // Fuel depends only on the electrical output.
        p.add_row(
            Relation::Eq,
            0.0,
            &[(power[k], 1.0), (fuel[k], -chp.fuel_efficiency)],
        );

        // Commitment transitions: b[k] - b[k-1] = start[k] - stop[k].
        if k == 0 {
            let prev = if hist.on { 1.0 } else { 0.0 };
            p.add_row(
                Relation::Eq,
                prev,
                &[(on[0], 1.0), (start[0], -1.0), (stop[0], 1.0)],
            );
        } else {
            p.add_row(
                Relation::Eq,
                0.0,
                &[
                    (on[k], 1.0),
                    (on[k - 1], -1.0),
                    (start[k], -1.0),
                    (stop[k], 1.0),
                ],
            );
        }

        // Minimum up/down: starts (stops) within the trailing window hold
        // the unit on (off).
        let mut up_row: Vec<(VarId, f64)> = vec![(on[k], -1.0)];
        let mut down_row: Vec<(VarId, f64)> = vec![(on[k], 1.0)];
        for j in (0..=k).rev() {
            if elapsed_h(grid, j, k) >= chp.min_up_h && elapsed_h(grid, j, k) >= chp.min_down_h {
                break;
            }
            if elapsed_h(grid, j, k) < chp.min_up_h {
                up_row.push((start[j], 1.0));
            }
            if elapsed_h(grid, j, k) < chp.min_down_h {
                down_row.push((stop[j], 1.0));
            }
        }
        if up_row.len() > 1 {
            p.add_row(Relation::Le, 0.0, &up_row);
        }
        if down_row.len() > 1 {
            p.add_row(Relation::Le, 1.0, &down_row);
        }

        // Ramping applies between committed steps; transitions are released
        // by the big-M commitment terms.
        let dt = grid.step(k).duration_h();
        if k == 0 {
            let prev_b = if hist.on { 1.0 } else { 0.0 };
            p.add_row(
                Relation::Le,
                hist.prev_p_kw + chp.ramp_up_kw_per_h * dt + big_m * (2.0 - prev_b),
                &[(power[0], 1.0), (on[0], big_m)],
            );
            p.add_row(
                Relation::Le,
                -hist.prev_p_kw + chp.ramp_down_kw_per_h * dt + big_m * (2.0 - prev_b),
                &[(power[0], -1.0), (on[0], big_m)],
            );
        } else {
            p.add_row(
                Relation::Le,
                chp.ramp_up_kw_per_h * dt + 2.0 * big_m,
                &[
                    (power[k], 1.0),
                    (power[k - 1], -1.0),
                    (on[k], big_m),
                    (on[k - 1], big_m),
                ],
            );
            p.add_row(
                Relation::Le,
                chp.ramp_down_kw_per_h * dt + 2.0 * big_m,
                &[
                    (power[k], -1.0),
                    (power[k - 1], 1.0),
                    (on[k], big_m),
                    (on[k - 1], big_m),
                ],
            );
        }
    }

    ChpVars {
        power,
        heat,
        fuel,
        weight,
        on,
        start,
        stop,
    }
}

/// Creates trade variables for every linked pair with the line limits as
/// bounds. A zero limit fixes the corresponding components to zero.
pub fn build_coupling_constraints(
    p: &mut MilpProblem,
    network: &NetworkSpec,
    grid: &TimeGrid,
) -> Vec<PairTradeVars> {
    let n = grid.len();
    network
        .pairs()
        .into_iter()
        .map(|(i, j)| {
            let link = network.link(i, j).expect("pair comes from the link map");
            let mut mk = |cap: f64| -> Vec<VarId> {
                (0..n).map(|_| p.add_var(0.0, cap)).collect()
            };
            PairTradeVars {
                i,
                j,
                p_ij: mk(link.kappa_e_kw),
                p_ji: mk(link.kappa_e_kw),
                q_ij: mk(link.kappa_h_kw),
                q_ji: mk(link.kappa_h_kw),
            }
        })
        .collect()
}

/// Attaches one hub's stage costs: energy procurement minus feed-in revenue,
/// network fees on received transfers, and the heat-slack penalty. All terms
/// scale with the step duration.
pub fn hub_stage_cost(
    p: &mut MilpProblem,
    vars: &HubVars,
    coupling: &[CouplingSide],
    import_price: &[f64],
    tariffs: &Tariffs,
    heat_slack_penalty: f64,
    grid: &TimeGrid,
) -> Result<(), BuildError> {
    let n = grid.len();
    if import_price.len() != n {
        return Err(BuildError::PriceLength {
            expected: n,
            got: import_price.len(),
        });
    }
    for k in 0..n {
        let dt = grid.step(k).duration_h();
        p.add_obj(vars.grid_import[k], dt * import_price[k]);
        p.add_obj(vars.grid_export[k], -dt * tariffs.feed_in);
        if let Some(gas) = &vars.gas_total {
            p.add_obj(gas[k], dt * tariffs.gas);
        }
        for side in coupling {
            p.add_obj(side.import_p[k], dt * tariffs.trade_fee_e);
            p.add_obj(side.import_q[k], dt * tariffs.trade_fee_h);
        }
        p.add_obj(vars.heat_surplus[k], dt * heat_slack_penalty);
        p.add_obj(vars.heat_deficit[k], dt * heat_slack_penalty);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hubmodel::{GbParams, HpParams, HubInitialState, PvParams, StorageParams};
    use crate::milp::{brute_force_oracle, solve_lp, solve_milp, MilpLimits, NumericPolicy};

    fn grid1h(n_steps: i64) -> TimeGrid {
        TimeGrid::uniform(n_steps * 60, 60, 15).unwrap()
    }

    fn pv_hp_hub() -> HubSpec {
        HubSpec {
            name: "pv-hp".into(),
            pv: Some(PvParams {
                efficiency: 0.15,
                area_m2: 380.0,
                p_min_kw: 0.0,
                p_max_kw: 80.0,
            }),
            hp: Some(HpParams {
                cop: 4.5,
                q_min_kw: 0.0,
                q_max_kw: 50.0,
            }),
            ..Default::default()
        }
    }

    #[test]
    fn pv_hp_single_step_shape() {
        // PV power, HP power and heat, grid import/export, and the two heat
        // slacks: 7 continuous variables; PV and HP definitions plus the two
        // balances: 4 rows.
        let mut p = MilpProblem::new();
        let hub = pv_hp_hub();
        let grid = grid1h(1);
        let forecast = HubForecast {
            l_e_kw: vec![10.0],
            l_h_kw: vec![5.0],
            irradiance_kw_m2: vec![0.5],
        };
        let init = HubInitialState::cold(&hub);
        build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        assert_eq!(p.n_vars(), 7);
        assert_eq!(p.n_rows(), 4);
        assert_eq!(p.n_binaries(), 0);
    }

    #[test]
    fn zero_demand_zero_irradiance_costs_nothing() {
        let mut hub = pv_hp_hub();
        hub.battery = Some(StorageParams {
            standby_eff: 0.999,
            cycle_eff: 0.99,
            e_min_kwh: 150.0,
            e_max_kwh: 750.0,
            p_max_kw: 200.0,
            e_init_kwh: None,
        });
        let grid = grid1h(24);
        let n = grid.len();
        let forecast = HubForecast {
            l_e_kw: vec![0.0; n],
            l_h_kw: vec![0.0; n],
            irradiance_kw_m2: vec![0.0; n],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        let prices = vec![0.27; n];
        hub_stage_cost(&mut p, &vars, &[], &prices, &Tariffs::default(), 10.0, &grid).unwrap();
        let sol = solve_lp(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        assert!(sol.objective.abs() < 1e-9, "objective {}", sol.objective);
        // Standby losses drain the battery but it stays in band untouched.
        let e_last = sol.value(vars.battery.as_ref().unwrap().energy[n - 1]);
        assert!((e_last - 450.0 * 0.999f64.powi(24)).abs() < 1e-6);
    }

    #[test]
    fn import_priced_at_peak_tariff() {
        // 10 kW of load for one hour at the peak tariff costs 2.70.
        let hub = HubSpec {
            name: "bare".into(),
            ..Default::default()
        };
        let grid = grid1h(1);
        let forecast = HubForecast {
            l_e_kw: vec![10.0],
            l_h_kw: vec![0.0],
            irradiance_kw_m2: vec![],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        hub_stage_cost(&mut p, &vars, &[], &[0.27], &Tariffs::default(), 10.0, &grid).unwrap();
        let sol = solve_lp(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        assert!((sol.objective - 2.70).abs() < 1e-9);
        assert!((sol.value(vars.grid_import[0]) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn surplus_exported_at_feed_in_tariff() {
        // 10 kW of surplus PV for one hour earns 1.20 at the feed-in tariff.
        let hub = HubSpec {
            name: "pv-only".into(),
            pv: Some(PvParams {
                efficiency: 0.15,
                area_m2: 380.0,
                p_min_kw: 0.0,
                p_max_kw: 80.0,
            }),
            ..Default::default()
        };
        let grid = grid1h(1);
        // 0.15 * I * 380 = 10 kW.
        let irr = 10.0 / (0.15 * 380.0);
        let forecast = HubForecast {
            l_e_kw: vec![0.0],
            l_h_kw: vec![0.0],
            irradiance_kw_m2: vec![irr],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        hub_stage_cost(&mut p, &vars, &[], &[0.22], &Tariffs::default(), 10.0, &grid).unwrap();
        let sol = solve_lp(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        assert!((sol.objective + 1.20).abs() < 1e-9);
        assert!((sol.value(vars.grid_export[0]) - 10.0).abs() < 1e-9);
    }

    fn table1_gb() -> GbParams {
        GbParams {
            seg_efficiency: [0.59, 0.83, 0.9, 0.82],
            q_min_kw: 0.0,
            q_max_kw: 350.0,
        }
    }

    #[test]
    fn boiler_full_load_uses_top_segment() {
        // Forcing 350 kW of boiler heat puts the unit in the 75-100 % load
        // segment: fuel is 350 / 0.82.
        let hub = HubSpec {
            name: "gb".into(),
            gb: Some(table1_gb()),
            ..Default::default()
        };
        let grid = grid1h(1);
        let forecast = HubForecast {
            l_e_kw: vec![0.0],
            l_h_kw: vec![350.0],
            irradiance_kw_m2: vec![],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        hub_stage_cost(&mut p, &vars, &[], &[0.22], &Tariffs::default(), 10.0, &grid).unwrap();
        let sol = brute_force_oracle(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        let gb = vars.gb.as_ref().unwrap();
        assert!((sol.value(gb.fuel[0]) - 350.0 / 0.82).abs() < 1e-6);
        // Exactly one segment is active.
        let active: u32 = (0..4)
            .map(|s| (sol.value(gb.seg_on[s][0]) > 0.5) as u32)
            .sum();
        assert_eq!(active, 1);
        assert!(sol.value(gb.seg_on[3][0]) > 0.5);
    }

    fn table1_chp() -> ChpParams {
        ChpParams {
            fuel_efficiency: 0.364,
            vertex_p_kw: [380.0, 315.0, 745.0, 800.0],
            vertex_q_kw: [0.0, 515.0, 1220.0, 0.0],
            ramp_up_kw_per_h: 400.0,
            ramp_down_kw_per_h: 400.0,
            min_up_h: 16.0,
            min_down_h: 4.0,
        }
    }

    #[test]
    fn chp_vertex_a_fuel() {
        // Pinned to vertex A: 380 kW electrical, no heat, fuel 380 / 0.364.
        let hub = HubSpec {
            name: "chp".into(),
            chp: Some(table1_chp()),
            ..Default::default()
        };
        let grid = grid1h(1);
        let forecast = HubForecast {
            l_e_kw: vec![0.0],
            l_h_kw: vec![0.0],
            irradiance_kw_m2: vec![],
        };
        // Start the unit already on and at vertex-A power so ramps allow it.
        let mut init = HubInitialState::cold(&hub);
        init.chp.on = true;
        init.chp.hours_in_state = 16.0;
        init.chp.prev_p_kw = 380.0;
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        let chp = vars.chp.as_ref().unwrap();
        p.add_row(Relation::Eq, 1.0, &[(chp.weight[0][0], 1.0)]);
        let sol = brute_force_oracle(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        assert!((sol.value(chp.power[0]) - 380.0).abs() < 1e-7);
        assert!(sol.value(chp.heat[0]).abs() < 1e-7);
        assert!((sol.value(chp.fuel[0]) - 380.0 / 0.364).abs() < 1e-4);
        assert!((sol.value(chp.fuel[0]) - 1043.96).abs() < 5e-3);
    }

    #[test]
    fn chp_heat_demand_picks_vertex_b() {
        // Serving exactly 515 kW of heat from the CHP at minimum fuel sits
        // on vertex B with 315 kW electrical.
        let hub = HubSpec {
            name: "chp".into(),
            chp: Some(table1_chp()),
            ..Default::default()
        };
        let grid = grid1h(1);
        let forecast = HubForecast {
            l_e_kw: vec![0.0],
            l_h_kw: vec![515.0],
            irradiance_kw_m2: vec![],
        };
        let mut init = HubInitialState::cold(&hub);
        init.chp.on = true;
        init.chp.hours_in_state = 16.0;
        init.chp.prev_p_kw = 315.0;
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        // Disallow the heat slacks so the CHP must serve the demand, and
        // price fuel so the solver minimizes it.
        let chp = vars.chp.as_ref().unwrap();
        p.set_bounds(vars.heat_surplus[0], 0.0, 0.0);
        p.set_bounds(vars.heat_deficit[0], 0.0, 0.0);
        p.add_obj(chp.fuel[0], 1.0);
        p.add_obj(vars.grid_export[0], -0.01);
        let sol = brute_force_oracle(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        assert!((sol.value(chp.weight[1][0]) - 1.0).abs() < 1e-6);
        assert!((sol.value(chp.power[0]) - 315.0).abs() < 1e-6);
    }

    #[test]
    fn storage_dynamics_scale_with_step_length() {
        // A 2-hour step decays the state twice and integrates power over
        // two hours.
        let hub = HubSpec {
            name: "bat".into(),
            battery: Some(StorageParams {
                standby_eff: 0.999,
                cycle_eff: 0.99,
                e_min_kwh: 0.0,
                e_max_kwh: 1000.0,
                p_max_kw: 200.0,
                e_init_kwh: Some(500.0),
            }),
            ..Default::default()
        };
        let grid = TimeGrid::multi_horizon(
            &[crate::timegrid::ScheduleEntry { res_min: 120, count: 1 }],
            15,
        )
        .unwrap();
        let forecast = HubForecast {
            l_e_kw: vec![0.0],
            l_h_kw: vec![0.0],
            irradiance_kw_m2: vec![],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        let bat = vars.battery.as_ref().unwrap();
        // Force a 100 kW charge over the step.
        p.set_bounds(bat.charge[0], 100.0, 100.0);
        let sol = solve_lp(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        let expect = 0.999f64.powf(2.0) * 500.0 + 2.0 * 0.99 * 100.0;
        assert!((sol.value(bat.energy[0]) - expect).abs() < 1e-9);
    }

    #[test]
    fn infeasible_heat_is_absorbed_by_deficit_slack() {
        // Heat demand beyond the only heat source stays feasible through the
        // deficit slack, which is priced at the penalty.
        let hub = pv_hp_hub();
        let grid = grid1h(1);
        let forecast = HubForecast {
            l_e_kw: vec![0.0],
            l_h_kw: vec![80.0],
            irradiance_kw_m2: vec![0.0],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        hub_stage_cost(&mut p, &vars, &[], &[0.22], &Tariffs::default(), 10.0, &grid).unwrap();
        let sol = solve_lp(&p, &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        assert!((sol.value(vars.heat_deficit[0]) - 30.0).abs() < 1e-6);
        assert!(sol.value(vars.heat_surplus[0]).abs() < 1e-9);
    }

    #[test]
    fn forecast_length_mismatch_is_an_error() {
        let hub = pv_hp_hub();
        let grid = grid1h(2);
        let forecast = HubForecast {
            l_e_kw: vec![1.0],
            l_h_kw: vec![1.0, 1.0],
            irradiance_kw_m2: vec![0.0, 0.0],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let err = build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false)
            .unwrap_err();
        assert!(matches!(err, BuildError::ForecastLength { .. }));
    }

    #[test]
    fn chp_minimum_up_time_holds_after_start() {
        // On a 4 x 1 h grid with min-up 3 h, starting in step 0 forces the
        // unit on in steps 0-2; shutting down in step 3 is allowed.
        let mut chp = table1_chp();
        chp.min_up_h = 3.0;
        chp.min_down_h = 1.0;
        let hub = HubSpec {
            name: "chp".into(),
            chp: Some(chp),
            ..Default::default()
        };
        let grid = grid1h(4);
        let forecast = HubForecast {
            l_e_kw: vec![0.0; 4],
            l_h_kw: vec![0.0; 4],
            irradiance_kw_m2: vec![],
        };
        let init = HubInitialState::cold(&hub);
        let mut p = MilpProblem::new();
        let vars =
            build_hub_constraints(&mut p, &hub, &grid, &forecast, &init, &[], false).unwrap();
        let chp = vars.chp.as_ref().unwrap();
        // Force a start in step 0 and reward being off afterwards.
        p.set_bounds(chp.on[0], 1.0, 1.0);
        for k in 0..4 {
            p.add_obj(chp.on[k], 1.0);
        }
        let sol = solve_milp(&p, &MilpLimits::default(), &NumericPolicy::default()).unwrap();
        assert!(sol.status.is_optimal());
        let on: Vec<f64> = (0..4).map(|k| sol.value(chp.on[k])).collect();
        assert!(on[0] > 0.5 && on[1] > 0.5 && on[2] > 0.5, "on = {on:?}");
        assert!(on[3] < 0.5, "unit should shut down after min-up, on = {on:?}");
    }
}
