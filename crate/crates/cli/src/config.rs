use std::path::{Path, PathBuf};

use clap::Args;
use honeycomb_berry::mapping::ProtocolConfig;
use honeycomb_berry::oracle::protocol::OracleConfig;
use honeycomb_berry::semiclassics::ForceSpec;
use honeycomb_berry::{BandIndex, KPoint, LatticeModel, Window};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Settings shared by every subcommand. Each one may come from the config
/// file or a flag; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Overrides {
    /// Sublattice bias Δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Hopping along δ3 relative to the other two bonds (x′).
    #[arg(long)]
    pub strain: Option<f64>,
    /// upper | lower (also +1 | -1).
    #[arg(long, allow_hyphen_values = true)]
    pub band: Option<String>,
    /// Force magnitude F.
    #[arg(long)]
    pub force: Option<f64>,
    /// Force angle φ in radians.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Propagation time of the mapping protocol.
    #[arg(long)]
    pub time: Option<f64>,
    /// Integrator step (semiclassics) and Chebyshev step (packet).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub grid_nx: Option<usize>,
    #[arg(long)]
    pub grid_ny: Option<usize>,
    /// kx0,kx1,ky0,ky1
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    /// Flake size n1,n2 in unit cells.
    #[arg(long, value_delimiter = ',')]
    pub cells: Option<Vec<usize>>,
    /// Packet width in NN distances.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Nodes per side of the reciprocal cell for plaquette grids.
    #[arg(long)]
    pub plaquette_cells: Option<usize>,
    /// Samples per segment of the Γ→K→K′ profile.
    #[arg(long)]
    pub profile_samples: Option<usize>,
    /// Strain values for merge-scan, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub strains: Option<Vec<f64>>,
    /// Packet momentum kx,ky.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub k0: Option<Vec<f64>>,
}

impl Overrides {
    fn merged_over(self, file: Overrides) -> Overrides {
        Overrides {
            delta: self.delta.or(file.delta),
            strain: self.strain.or(file.strain),
            band: self.band.or(file.band),
            force: self.force.or(file.force),
            phi: self.phi.or(file.phi),
            time: self.time.or(file.time),
            dt: self.dt.or(file.dt),
            grid_nx: self.grid_nx.or(file.grid_nx),
            grid_ny: self.grid_ny.or(file.grid_ny),
            window: self.window.or(file.window),
            cells: self.cells.or(file.cells),
            sigma: self.sigma.or(file.sigma),
            out: self.out.or(file.out),
            plaquette_cells: self.plaquette_cells.or(file.plaquette_cells),
            profile_samples: self.profile_samples.or(file.profile_samples),
            strains: self.strains.or(file.strains),
            k0: self.k0.or(file.k0),
        }
    }
}

/// Defaults that differ between subcommands.
#[derive(Debug, Clone, Copy)]
pub struct CommandDefaults {
    pub grid: usize,
    pub dt: f64,
}

/// Fully resolved configuration, echoed into every metadata file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub delta: f64,
    pub strain: f64,
    pub band: BandIndex,
    pub force: f64,
    pub phi: f64,
    pub time: f64,
    pub dt: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub window: Window,
    pub cells: [usize; 2],
    pub sigma: f64,
    pub out: PathBuf,
    pub plaquette_cells: usize,
    pub profile_samples: usize,
    pub strains: Vec<f64>,
    pub k0: KPoint,
}

pub fn parse_band(s: &str) -> Result<BandIndex, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "upper" | "+1" | "1" | "+" => Ok(BandIndex::Upper),
        "lower" | "-1" | "-" => Ok(BandIndex::Lower),
        other => Err(CliError::Config(format!("band must be upper or lower, got '{other}'"))),
    }
}

fn default_strains() -> Vec<f64> {
    (0..=30).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub fn load_file(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(flags: Overrides, file: Option<&Path>, defaults: CommandDefaults) -> Result<Self, CliError> {
        let file = match file {
            Some(p) => load_file(p)?,
            None => Overrides::default(),
        };
        let o = flags.merged_over(file);
        let window = match o.window {
            None => Window::brillouin_zone(),
            Some(w) if w.len() == 4 => {
                Window::new(w[0], w[1], w[2], w[3]).map_err(|e| CliError::Config(format!("window: {e}")))?
            }
            Some(w) => return Err(CliError::Config(format!("window needs 4 values, got {}", w.len()))),
        };
        let cells = match o.cells.as_deref() {
            None => [80, 80],
            Some([a, b]) => [*a, *b],
            Some(c) => return Err(CliError::Config(format!("cells needs 2 values, got {}", c.len()))),
        };
        let k0 = match o.k0.as_deref() {
            None => KPoint::new(KPoint::K.kx + 0.4, 0.0),
            Some([x, y]) => KPoint::new(*x, *y),
            Some(k) => return Err(CliError::Config(format!("k0 needs 2 values, got {}", k.len()))),
        };
        let cfg = RunConfig {
            delta: o.delta.unwrap_or(0.1),
            strain: o.strain.unwrap_or(1.0),
            band: o.band.as_deref().map(parse_band).transpose()?.unwrap_or(BandIndex::Upper),
            force: o.force.unwrap_or(1.0),
            phi: o.phi.unwrap_or(0.0),
            time: o.time.unwrap_or(0.2),
            dt: o.dt.unwrap_or(defaults.dt),
            grid_nx: o.grid_nx.unwrap_or(defaults.grid),
            grid_ny: o.grid_ny.unwrap_or(defaults.grid),
            window,
            cells,
            sigma: o.sigma.unwrap_or(10.0),
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            plaquette_cells: o.plaquette_cells.unwrap_or(300),
            profile_samples: o.profile_samples.unwrap_or(200),
            strains: o.strains.unwrap_or_else(default_strains),
            k0,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let positive = [("force", self.force), ("time", self.time), ("dt", self.dt), ("sigma", self.sigma)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.phi.is_finite() {
            return Err(CliError::Config(format!("phi must be finite, got {}", self.phi)));
        }
        if self.grid_nx < 2 || self.grid_ny < 2 || self.plaquette_cells < 2 || self.profile_samples < 2 {
            return Err(CliError::Config("grid sizes and sample counts must be at least 2".into()));
        }
        if self.cells.iter().any(|&n| n < 2) {
            return Err(CliError::Config("cells must be at least 2 in each direction".into()));
        }
        if self.strains.is_empty() || self.strains.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(CliError::Config("strains must be a non-empty list of positive values".into()));
        }
        self.model()?;
        Ok(())
    }

    pub fn model(&self) -> Result<LatticeModel, CliError> {
        LatticeModel::new(self.delta, self.strain).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn force_spec(&self) -> Result<ForceSpec, CliError> {
        ForceSpec::new(self.force, self.phi).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn protocol(&self) -> Result<ProtocolConfig, CliError> {
        ProtocolConfig::new(self.force_spec()?, self.time, self.dt).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn oracle(&self) -> Result<OracleConfig, CliError> {
        Ok(OracleConfig {
            n1: self.cells[0],
            n2: self.cells[1],
            sigma: self.sigma,
            dt: self.dt,
            band: self.band,
            // The semiclassical reference keeps a fine step whatever the
            // Chebyshev step is.
            protocol: ProtocolConfig::new(self.force_spec()?, self.time, self.dt.min(1e-4))
                .map_err(|e| CliError::Config(e.to_string()))?,
        })
    }
}
