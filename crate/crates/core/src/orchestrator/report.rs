use std::fmt;
use std::io::Write;
use std::time::Duration;

use serde::Serialize;

use super::AuditVerdict;
use crate::association::DecisionVars;
use crate::placement::ScaTraceRow;
use crate::power::EnergyBreakdown;
use crate::radio::{Placement, RateTable};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationStatus {
    /// Association solved under the current interference pattern.
    Solved,
    /// Association needed interference-free rates.
    Retried,
    /// Association failed; the previous iterate was kept.
    KeptPrevious,
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// 1-based.
    pub iteration: usize,
    pub status: IterationStatus,
    /// Energy of the iterate, joules.
    pub objective_j: f64,
    /// Best energy among feasible iterates so far.
    pub best_objective_j: Option<f64>,
    pub lp_objective_j: Option<f64>,
    /// True minimum rate margin before the placement rounds, then after each.
    pub min_margins: Vec<f64>,
    pub active_drones: Vec<usize>,
    pub wall_time: Duration,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    iteration: usize,
    status: IterationStatus,
    objective_j: f64,
    best_objective_j: Option<f64>,
    lp_objective_j: Option<f64>,
    min_margin_anchor: Option<f64>,
    min_margin_final: Option<f64>,
    active_drones: &'a str,
}

#[derive(Serialize)]
struct AssociationRow {
    block: usize,
    user: u32,
    station_kind: &'static str,
    station_id: u32,
    subchannel: usize,
    rate_bps_hz: f64,
}

/// Final binary decisions, placement and energies of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub vars: DecisionVars,
    pub placement: Placement,
    /// Rates of every link under the reported placement and activity.
    pub rates: RateTable,
    pub energy: EnergyBreakdown,
    pub trace: Vec<IterationTrace>,
    pub verdict: AuditVerdict,
    pub sca_trace: Vec<ScaTraceRow>,
}

impl SolutionReport {
    pub fn is_feasible(&self) -> bool {
        self.verdict.is_feasible()
    }

    pub fn active_drones(&self) -> Vec<usize> {
        let blocks = self.placement.coords.len();
        (0..blocks).map(|n| self.vars.active_drone_count(n)).collect()
    }

    /// Rate of user `u` on its assigned link in block `n`.
    pub fn user_rate(&self, n: usize, u: usize) -> Option<f64> {
        self.vars
            .assignment(n, u)
            .map(|(st, m)| self.rates.station(n, u, st, m))
    }

    /// `block,user,station_kind,station_id,subchannel,rate_bps_hz`, one row
    /// per user and block.
    pub fn write_associations<W: Write>(&self, s: &Scenario, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for n in 0..s.num_blocks {
            for (u, ue) in s.users.iter().enumerate() {
                let Some((st, m)) = self.vars.assignment(n, u) else {
                    continue;
                };
                w.serialize(AssociationRow {
                    block: n + 1,
                    user: ue.id,
                    station_kind: st.kind(),
                    station_id: st.id(s),
                    subchannel: m + 1,
                    rate_bps_hz: self.rates.station(n, u, st, m),
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_energy<W: Write>(&self, s: &Scenario, out: W) -> csv::Result<()> {
        self.energy.write_csv(s, out)
    }

    pub fn write_rates<W: Write>(&self, s: &Scenario, out: W) -> csv::Result<()> {
        self.rates.write_csv(s, out)
    }

    /// One row per outer iteration; wall time is left out so the file only
    /// depends on the inputs.
    pub fn write_trace<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for t in &self.trace {
            let drones = t
                .active_drones
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";");
            w.serialize(TraceRow {
                iteration: t.iteration,
                status: t.status,
                objective_j: t.objective_j,
                best_objective_j: t.best_objective_j,
                lp_objective_j: t.lp_objective_j,
                min_margin_anchor: t.min_margins.first().copied(),
                min_margin_final: t.min_margins.last().copied(),
                active_drones: &drones,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sca_trace<W: Write>(&self, out: W) -> csv::Result<()> {
        crate::placement::write_sca_trace(&self.sca_trace, out)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            total_j: self.energy.total(),
            gbs_j: self.energy.gbs_total(),
            dbs_j: self.energy.dbs_total(),
            active_drones: self.active_drones(),
            feasible: self.is_feasible(),
            iterations: self.trace.len(),
        }
    }
}

/// One-line outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub total_j: f64,
    pub gbs_j: f64,
    pub dbs_j: f64,
    pub active_drones: Vec<usize>,
    pub feasible: bool,
    pub iterations: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let drones = self
            .active_drones
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "total_energy_j={:.3} gbs_energy_j={:.3} dbs_energy_j={:.3} active_drones_per_block=[{}] feasible={} iterations={}",
            self.total_j, self.gbs_j, self.dbs_j, drones, self.feasible, self.iterations
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::{run, RunOptions};
    use crate::scenario::{generate_random_scenario, GeneratorConfig, LoadProfile};

    fn reemit(text: &str) -> String {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().unwrap().clone();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&headers).unwrap();
        for rec in r.records() {
            w.write_record(&rec.unwrap()).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    #[test]
    fn csv_outputs_round_trip() {
        let mut cfg = GeneratorConfig::new(21, 6, 4, 4, 200.0);
        cfg.load = LoadProfile::NearCapacity { max_spare: 1 };
        let s = generate_random_scenario(&cfg);
        let rep = run(&s, &RunOptions::default()).unwrap();
        let mut outputs = Vec::new();
        let mut buf = Vec::new();
        rep.write_associations(&s, &mut buf).unwrap();
        outputs.push(buf);
        let mut buf = Vec::new();
        rep.write_energy(&s, &mut buf).unwrap();
        outputs.push(buf);
        let mut buf = Vec::new();
        rep.write_trace(&mut buf).unwrap();
        outputs.push(buf);
        let mut buf = Vec::new();
        rep.write_rates(&s, &mut buf).unwrap();
        outputs.push(buf);
        for out in outputs {
            let text = String::from_utf8(out).unwrap();
            assert_eq!(reemit(&text), text);
        }
    }

    #[test]
    fn associations_have_one_row_per_user_and_block() {
        let s = generate_random_scenario(&GeneratorConfig::new(22, 5, 4, 4, 200.0));
        let rep = run(&s, &RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        rep.write_associations(&s, &mut buf).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(
            r.headers().unwrap(),
            vec![
                "block",
                "user",
                "station_kind",
                "station_id",
                "subchannel",
                "rate_bps_hz"
            ]
        );
        let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 5 * s.num_blocks);
        for row in rows {
            assert!(row[5].parse::<f64>().unwrap() >= 2.0);
        }
    }
}
