use std::fmt;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::rgat::Mode;

use super::{train, Dataset, HarnessError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    Ordinary,
    Reshaped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    GatOnly,
    Rgat,
    RgatNoNcon,
}

impl TreeKind {
    pub const ALL: [TreeKind; 2] = [TreeKind::Ordinary, TreeKind::Reshaped];

    pub fn as_str(self) -> &'static str {
        match self {
            TreeKind::Ordinary => "ordinary",
            TreeKind::Reshaped => "reshaped",
        }
    }
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::GatOnly, Variant::Rgat, Variant::RgatNoNcon];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::GatOnly => "gat_only",
            Variant::Rgat => "rgat",
            Variant::RgatNoNcon => "rgat_no_ncon",
        }
    }

    /// Model mode for this cell; ordinary trees have no `n:con` edges to drop.
    pub fn mode(self, tree: TreeKind) -> Option<Mode> {
        match (tree, self) {
            (TreeKind::Reshaped, Variant::GatOnly) => Some(Mode::GatOnly),
            (TreeKind::Reshaped, Variant::Rgat) => Some(Mode::Rgat),
            (TreeKind::Reshaped, Variant::RgatNoNcon) => Some(Mode::RgatNoNcon),
            (TreeKind::Ordinary, Variant::GatOnly) => Some(Mode::OrdinaryGat),
            (TreeKind::Ordinary, Variant::Rgat) => Some(Mode::OrdinaryGraph),
            (TreeKind::Ordinary, Variant::RgatNoNcon) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub best_epoch: usize,
    /// Largest per-epoch relation-embedding gradient norm.
    pub max_relation_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub tree: TreeKind,
    pub variant: Variant,
    pub mode: Option<Mode>,
    pub runs: Vec<SeedResult>,
}

impl AblationCell {
    pub fn mean_accuracy(&self) -> Option<f64> {
        (!self.runs.is_empty()).then(|| self.runs.iter().map(|r| r.accuracy).sum::<f64>() / self.runs.len() as f64)
    }

    pub fn best_accuracy(&self) -> Option<f64> {
        self.runs.iter().map(|r| r.accuracy).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub config_hash: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    pub fn cell(&self, tree: TreeKind, variant: Variant) -> &AblationCell {
        self.cells
            .iter()
            .find(|c| c.tree == tree && c.variant == variant)
            .expect("every cell present")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tree,variant,mode,seed,accuracy,macro_f1,best_epoch,max_relation_grad_norm,config_hash\n");
        for c in &self.cells {
            let Some(mode) = c.mode else {
                out += &format!("{},{},,,,,,,{}\n", c.tree.as_str(), c.variant.as_str(), self.config_hash);
                continue;
            };
            for r in &c.runs {
                out += &format!(
                    "{},{},{},{},{:.6},{:.6},{},{:e},{}\n",
                    c.tree.as_str(),
                    c.variant.as_str(),
                    mode,
                    r.seed,
                    r.accuracy,
                    r.macro_f1,
                    r.best_epoch,
                    r.max_relation_grad_norm,
                    self.config_hash
                );
            }
        }
        out
    }
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "config {}", self.config_hash)?;
        writeln!(f, "seeds  {:?}", self.seeds)?;
        writeln!(f, "mean test accuracy (%)")?;
        writeln!(f, "{:<14} {:>10} {:>10}", "", "ordinary", "reshaped")?;
        for v in Variant::ALL {
            let cell = |t| {
                self.cell(t, v)
                    .mean_accuracy()
                    .map_or("-".to_string(), |a| format!("{:.2}", 100.0 * a))
            };
            writeln!(f, "{:<14} {:>10} {:>10}", v.as_str(), cell(TreeKind::Ordinary), cell(TreeKind::Reshaped))?;
        }
        Ok(())
    }
}

/// SHA-256 of the config's JSON form, hex encoded.
pub fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    format!("{:x}", Sha256::digest(json.as_bytes()))
}

/// Trains every populated tree × variant cell once per seed with otherwise
/// identical settings. Runs go under `out/<mode>/seed-<seed>/`.
pub fn ablate(cfg: &RunConfig, data: &Dataset, seeds: &[u64], out: Option<&Path>) -> Result<AblationTable, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Config("ablation needs at least one seed".into()));
    }
    let mut cells = Vec::new();
    for tree in TreeKind::ALL {
        for variant in Variant::ALL {
            let mode = variant.mode(tree);
            let mut runs = Vec::new();
            if let Some(mode) = mode {
                for &seed in seeds {
                    let run_cfg = RunConfig {
                        seed,
                        hyper: crate::Hyper { mode, ..cfg.hyper },
                        ..cfg.clone()
                    };
                    let dir = out.map(|o| o.join(mode.as_str()).join(format!("seed-{seed}")));
                    log::info!("ablation cell {}/{} seed {seed}", tree.as_str(), variant.as_str());
                    let outcome = train(&run_cfg, data, dir.as_deref())?;
                    runs.push(SeedResult {
                        seed,
                        accuracy: outcome.best_report.accuracy,
                        macro_f1: outcome.best_report.macro_f1,
                        best_epoch: outcome.best_epoch,
                        max_relation_grad_norm: outcome
                            .history
                            .iter()
                            .filter_map(|r| r.relation_grad_norm)
                            .fold(0.0, f64::max),
                    });
                }
            }
            cells.push(AblationCell {
                tree,
                variant,
                mode,
                runs,
            });
        }
    }
    Ok(AblationTable {
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        seeds: seeds.to_vec(),
        cells,
    })
}
