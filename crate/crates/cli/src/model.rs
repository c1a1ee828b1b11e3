use std::collections::BTreeMap;
use std::sync::Arc;

use poclab::models::{load_kernel_str, pca_to_pomm, IsingKernel, PcaSpec, StavskayaKernel, VoterKernel};
use poclab::sampler::BoundaryCondition;
use poclab::{ColorSpace, Configuration, Kernel, SiteSpace, TimeBox};

use crate::args::{ModelArgs, ModelKind};
use crate::run::{CliError, Run};

pub struct Model {
    pub space: Arc<SiteSpace>,
    pub kernel: Arc<dyn Kernel>,
    pub tbox: TimeBox,
}

impl Model {
    pub fn kernel(&self) -> &dyn Kernel {
        &*self.kernel
    }

    pub fn colors(&self) -> &ColorSpace {
        self.kernel.colors()
    }
}

fn need(value: Option<f64>, flag: &str, model: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--model {model} needs {flag}")))
}

/// Builds the kernel and its box. Lattice models use the `width × height`
/// interior of a Z² window; file and PCA models use every site of their own
/// window whose nearest past is inside it.
pub fn build(args: &ModelArgs, width: u32, height: u32, run: &mut Run) -> Result<Model, CliError> {
    let usage = |e: poclab::Error| CliError::Usage(e.to_string());
    let kernel: Arc<dyn Kernel> = match args.model {
        ModelKind::Ising => Arc::new(IsingKernel::new(need(args.beta, "--beta", "ising")?, args.field).map_err(usage)?),
        ModelKind::Voter => match args.epsilon {
            Some(e) => Arc::new(VoterKernel::new(e).map_err(usage)?),
            None => Arc::new(
                VoterKernel::from_beta(need(args.beta, "--beta or --epsilon", "voter")?).map_err(usage)?,
            ),
        },
        ModelKind::Stavskaya => Arc::new(StavskayaKernel::new(need(args.p, "--p", "stavskaya")?).map_err(usage)?),
        ModelKind::File => {
            let path = args
                .path
                .as_ref()
                .ok_or_else(|| CliError::Usage("--model file needs --path".into()))?;
            let loaded = load_kernel_str(&run.read_input(path)?)?;
            let tbox = TimeBox::window_interior(loaded.space.clone())?;
            return Ok(Model {
                space: loaded.space,
                kernel: Arc::new(loaded.kernel),
                tbox,
            });
        }
        ModelKind::Pca => {
            let path = args
                .spec
                .as_ref()
                .ok_or_else(|| CliError::Usage("--model pca needs --spec".into()))?;
            let spec = PcaSpec::from_json(&run.read_input(path)?)?;
            let (space, kernel) = pca_to_pomm(spec)?;
            let tbox = TimeBox::window_interior(space.clone())?;
            return Ok(Model {
                space,
                kernel: Arc::new(kernel),
                tbox,
            });
        }
    };
    if width == 0 || height == 0 {
        return Err(CliError::Usage("box dimensions must be positive".into()));
    }
    let space = Arc::new(SiteSpace::z2_window(width, height)?);
    let tbox = TimeBox::z2_interior(space.clone())?;
    Ok(Model {
        space,
        kernel,
        tbox,
    })
}

/// `plus`, `minus`, `random:P`, or `file:PATH` with a JSON object mapping
/// site keys (`"x,y"`, or `"id"` for one-dimensional windows) to colors.
pub fn boundary(text: &str, model: &Model, run: &mut Run) -> Result<BoundaryCondition, CliError> {
    let Some(path) = text.strip_prefix("file:") else {
        return BoundaryCondition::parse(text, model.colors()).map_err(|e| CliError::Usage(e.to_string()));
    };
    let values: BTreeMap<String, i64> = serde_json::from_str(&run.read_input(path.as_ref())?)
        .map_err(|e| CliError::Runtime(format!("{path}: {e}")))?;
    let mut config = Configuration::empty(model.space.len());
    for (key, value) in values {
        let parts: Vec<&str> = key.split(',').map(str::trim).collect();
        let parsed: Option<Vec<i64>> = parts.iter().map(|s| s.parse().ok()).collect();
        let site_key = match parsed.as_deref() {
            Some([a]) => (*a, 0),
            Some([a, b]) => (*a, *b),
            _ => return Err(CliError::Runtime(format!("{path}: bad site key '{key}'"))),
        };
        let site = model.space.site(site_key)?;
        config.set(site, model.colors().color_of(value)?);
    }
    Ok(BoundaryCondition::Explicit(config))
}
