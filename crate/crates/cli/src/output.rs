use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use honeycomb_berry::model::{A1, A2, B1, B2, NN_VECTORS};
use honeycomb_berry::{CurvatureGrid, KPoint, LatticeModel};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const METADATA_FILE: &str = "metadata.json";

/// Round-trip float formatting used in every CSV cell.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// One output directory; every file written is listed in the metadata.
pub struct OutputDir {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(OutputDir { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_table(
        &mut self,
        name: &str,
        about: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let path = self.path(name);
        let csv_err = |source| CliError::Csv { path: path.clone(), source };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.files.insert(name.into(), about.into());
        Ok(())
    }

    /// `kx, ky, value` per node, with a `status` column when given.
    pub fn write_grid(
        &mut self,
        name: &str,
        about: &str,
        grid: &CurvatureGrid,
        status: Option<&[&str]>,
    ) -> Result<(), CliError> {
        let rows: Vec<Vec<String>> = (0..grid.grid.len())
            .map(|i| {
                let k = grid.grid.node_at(i);
                let mut row = vec![fmt(k.kx), fmt(k.ky), fmt(grid.values[i])];
                if let Some(s) = status {
                    row.push(s[i].to_string());
                }
                row
            })
            .collect();
        let header: &[&str] = if status.is_some() { &["kx", "ky", "value", "status"] } else { &["kx", "ky", "value"] };
        self.write_table(name, about, header, &rows)
    }

    pub fn write_json(&mut self, name: &str, about: &str, value: &Value) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("JSON values serialise");
        std::fs::write(&path, text + "\n").map_err(|source| CliError::Io { path, source })?;
        self.files.insert(name.into(), about.into());
        Ok(())
    }

    /// Writes the sidecar describing the run; call last.
    pub fn finish(mut self, command: &str, cfg: &RunConfig, results: Value) -> Result<(), CliError> {
        let model = cfg.model()?;
        let meta = json!({
            "tool": "hcberry",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": cfg,
            "model": model_json(&model),
            "units": {
                "energy": "nearest-neighbour hopping",
                "length": "nearest-neighbour distance",
                "time": "inverse hopping",
                "berry_curvature": "(nearest-neighbour distance)^2",
            },
            "lattice": lattice_json(),
            "files": self.files.clone(),
            "results": results,
        });
        self.write_json(METADATA_FILE, "run description", &meta)
    }
}

fn model_json(m: &LatticeModel) -> Value {
    json!({ "delta": m.delta(), "strain": m.strain(), "hoppings": m.hoppings() })
}

fn point(k: KPoint) -> [f64; 2] {
    [k.kx, k.ky]
}

fn lattice_json() -> Value {
    json!({
        "nn_vectors": NN_VECTORS,
        "a1": A1,
        "a2": A2,
        "b1": point(B1),
        "b2": point(B2),
        "k": point(KPoint::K),
        "k_prime": point(KPoint::K_PRIME),
    })
}
