//! Train-encode-solve pipeline and the three sweep families (loss weighting,
//! hidden size, topology).

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::mlp::{evaluate, train, LossFamily, LossSpec, Metrics, MlpParams, Topology, TrainConfig};
use crate::solver::{MilpResult, MilpStatus, SolveConfig};
use crate::system::SystemSpec;
use crate::uc::{solve_uc, UcSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Loss,
    Size,
    Topology,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss" => Ok(SweepMode::Loss),
            "size" => Ok(SweepMode::Size),
            "topology" => Ok(SweepMode::Topology),
            _ => Err(Error::InvalidArgument(format!("unknown sweep mode {s:?}"))),
        }
    }
}

impl SweepMode {
    pub fn default_grid(self) -> &'static str {
        match self {
            SweepMode::Loss => "l1:1,l1:5,l2:1,l2:5",
            SweepMode::Size => "2,4,8,32",
            SweepMode::Topology => "[32];[16,16];[8,24];[16,8,8]",
        }
    }
}

/// One sweep configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub label: String,
    pub hidden: Vec<usize>,
    pub loss: LossSpec,
}

/// Parse a grid. Loss grids are `family:ratio` items separated by commas
/// (ratio = C+/C- with C- = 1); size grids are comma-separated widths of a
/// single hidden layer; topology grids are `;`-separated hidden lists.
pub fn parse_grid(mode: SweepMode, text: &str, hidden: &[usize], loss: &LossSpec) -> Result<Vec<SweepEntry>> {
    let bad = |item: &str| Error::InvalidArgument(format!("bad grid item {item:?}"));
    let items: Vec<&str> = match mode {
        SweepMode::Topology => text.split(';'),
        _ => text.split(','),
    }
    .map(str::trim)
    .filter(|s| !s.is_empty())
    .collect();
    if items.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    items
        .into_iter()
        .map(|item| match mode {
            SweepMode::Loss => {
                let (fam, ratio) = item.split_once(':').ok_or_else(|| bad(item))?;
                let family = match fam.trim().to_ascii_lowercase().as_str() {
                    "l1" => LossFamily::L1,
                    "l2" => LossFamily::L2,
                    _ => return Err(bad(item)),
                };
                let ratio: f64 = ratio.trim().parse().map_err(|_| bad(item))?;
                let loss = LossSpec::with_ratio(family, ratio);
                loss.validate()?;
                Ok(SweepEntry {
                    label: format!("{}:{ratio}", fam.trim().to_ascii_lowercase()),
                    hidden: hidden.to_vec(),
                    loss,
                })
            }
            SweepMode::Size => {
                let width: usize = item.parse().map_err(|_| bad(item))?;
                if width == 0 {
                    return Err(bad(item));
                }
                Ok(SweepEntry {
                    label: width.to_string(),
                    hidden: vec![width],
                    loss: *loss,
                })
            }
            SweepMode::Topology => {
                let hidden = Topology::parse_hidden(item)?;
                Ok(SweepEntry {
                    label: format!("[{}]", hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
                    hidden,
                    loss: *loss,
                })
            }
        })
        .collect()
}

/// Settings shared by every configuration of a sweep.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub solve: SolveConfig,
    pub nadir_floor: f64,
}

#[derive(Debug, Clone)]
pub struct ConfigOutcome {
    pub params: MlpParams,
    pub metrics: Metrics,
    pub result: MilpResult,
    pub solution: Option<UcSolution>,
}

/// Train one network on `data`, then solve the frequency-constrained UC.
pub fn run_config(
    spec: &SystemSpec,
    data: &Dataset,
    hidden: &[usize],
    loss: &LossSpec,
    cfg: &PipelineConfig,
) -> Result<ConfigOutcome> {
    let (params, _) = train(data, hidden, loss, &cfg.train)?;
    let split = if data.test_indices.is_empty() { Split::All } else { Split::Test };
    let metrics = evaluate(&params, data, split)?;
    let (_, result, solution) = solve_uc(spec, Some(&params), cfg.nadir_floor, &cfg.solve)?;
    Ok(ConfigOutcome {
        params,
        metrics,
        result,
        solution,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub config: String,
    pub status: String,
    pub mae: Option<f64>,
    pub r2: Option<f64>,
    pub conservative_proportion: Option<f64>,
    pub solve_time_s: Option<f64>,
    pub mip_gap: Option<f64>,
    pub total_cost: Option<f64>,
    pub nodes: Option<usize>,
    pub unit_hours: Option<usize>,
}

impl ReportRow {
    fn failed(config: String, err: &Error) -> Self {
        Self {
            config,
            status: format!("error: {err}"),
            mae: None,
            r2: None,
            conservative_proportion: None,
            solve_time_s: None,
            mip_gap: None,
            total_cost: None,
            nodes: None,
            unit_hours: None,
        }
    }

    fn from_outcome(config: String, o: &ConfigOutcome) -> Self {
        let r = &o.result;
        let has_incumbent = matches!(r.status, MilpStatus::Optimal | MilpStatus::FeasibleLimitHit);
        Self {
            config,
            status: r.status.label().to_string(),
            mae: Some(o.metrics.mae),
            r2: Some(o.metrics.r2),
            conservative_proportion: Some(o.metrics.conservative_proportion),
            solve_time_s: Some(r.wall_time),
            mip_gap: has_incumbent.then_some(r.mip_gap),
            total_cost: has_incumbent.then_some(r.objective),
            nodes: Some(r.nodes),
            unit_hours: o.solution.as_ref().map(UcSolution::committed_unit_hours),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Free-text description of the shared budget, written as a comment line.
    pub budget: String,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: &str =
    "config,status,mae,r2,conservative_proportion,solve_time_s,mip_gap,total_cost,nodes,unit_hours";

fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("# {}\n{REPORT_HEADER}\n", self.budget);
        for r in &self.rows {
            let status = r.status.replace([',', '\n'], ";");
            let _ = writeln!(
                s,
                "{},{status},{},{},{},{},{},{},{},{}",
                r.config,
                cell(r.mae),
                cell(r.r2),
                cell(r.conservative_proportion),
                cell(r.solve_time_s),
                cell(r.mip_gap),
                cell(r.total_cost),
                cell(r.nodes),
                cell(r.unit_hours),
            );
        }
        s
    }

    pub fn row(&self, config: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.config == config)
    }
}

/// Run every entry on the same data and budget. Failures become rows with an
/// error status; rows keep the request order.
pub fn run_sweep(
    spec: &SystemSpec,
    data: &Dataset,
    entries: &[SweepEntry],
    cfg: &PipelineConfig,
) -> ExperimentReport {
    let start = Instant::now();
    let rows: Vec<ReportRow> = entries
        .par_iter()
        .map(|e| match run_config(spec, data, &e.hidden, &e.loss, cfg) {
            Ok(o) => ReportRow::from_outcome(e.label.clone(), &o),
            Err(err) => ReportRow::failed(e.label.clone(), &err),
        })
        .collect();
    let budget = format!(
        "budget time_limit_s={} node_limit={} mip_gap_target={} epochs={} samples={} nadir_floor_hz={} sweep_wall_s={:.1}",
        cfg.solve.time_limit,
        if cfg.solve.node_limit == usize::MAX { "none".to_string() } else { cfg.solve.node_limit.to_string() },
        cfg.solve.mip_gap_target,
        cfg.train.epochs,
        data.len(),
        cfg.nadir_floor,
        start.elapsed().as_secs_f64(),
    );
    ExperimentReport { budget, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_dataset;
    use crate::freq_sim::SimConfig;
    use crate::system::tests::three_gen_spec;

    #[test]
    fn parses_grids() {
        let l1 = LossSpec::symmetric(LossFamily::L1);
        let g = parse_grid(SweepMode::Size, "2,4,8,32", &[8], &l1).unwrap();
        assert_eq!(g.iter().map(|e| e.hidden.clone()).collect::<Vec<_>>(), vec![vec![2], vec![4], vec![8], vec![32]]);
        let g = parse_grid(SweepMode::Topology, "[32];[16,16];[8,24]", &[8], &l1).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[1].label, "[16,16]");
        let g = parse_grid(SweepMode::Loss, SweepMode::Loss.default_grid(), &[8], &l1).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[1].loss, LossSpec::with_ratio(LossFamily::L1, 5.0));
        assert_eq!(g[3].hidden, vec![8]);
        assert!(parse_grid(SweepMode::Size, "2,x", &[8], &l1).is_err());
        assert!(parse_grid(SweepMode::Loss, "l3:1", &[8], &l1).is_err());
        assert!(parse_grid(SweepMode::Size, "", &[8], &l1).is_err());
        assert_eq!("topology".parse::<SweepMode>().unwrap(), SweepMode::Topology);
    }

    #[test]
    fn sweep_rows_in_request_order() {
        let spec = three_gen_spec();
        let data = generate_dataset(&spec, 120, 1, &SimConfig::default()).unwrap();
        let l2 = LossSpec::symmetric(LossFamily::L2);
        let entries = parse_grid(SweepMode::Size, "3,1,2", &[4], &l2).unwrap();
        let cfg = PipelineConfig {
            train: TrainConfig {
                epochs: 20,
                ..TrainConfig::default()
            },
            solve: SolveConfig {
                node_limit: 50,
                ..SolveConfig::default()
            },
            nadir_floor: f64::NEG_INFINITY,
        };
        let report = run_sweep(&spec, &data, &entries, &cfg);
        let labels: Vec<&str> = report.rows.iter().map(|r| r.config.as_str()).collect();
        assert_eq!(labels, ["3", "1", "2"]);
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# budget"));
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        for line in lines {
            assert_eq!(line.split(',').count(), 10);
            for cell in line.split(',').skip(2) {
                assert!(cell == "n/a" || cell.parse::<f64>().unwrap().is_finite(), "{line}");
            }
        }
    }

    #[test]
    fn failures_become_rows() {
        let spec = three_gen_spec();
        let data = generate_dataset(&spec, 60, 1, &SimConfig::default()).unwrap();
        let entries = vec![SweepEntry {
            label: "bad".into(),
            hidden: vec![2],
            loss: LossSpec {
                family: LossFamily::L1,
                c_plus: -1.0,
                c_minus: 1.0,
            },
        }];
        let cfg = PipelineConfig {
            train: TrainConfig::default(),
            solve: SolveConfig::default(),
            nadir_floor: 49.2,
        };
        let report = run_sweep(&spec, &data, &entries, &cfg);
        assert!(report.rows[0].status.starts_with("error"));
        assert!(report.to_csv().lines().nth(2).unwrap().contains("n/a"));
    }
}
