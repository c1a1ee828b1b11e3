use crate::color::{Color, ColorSpace};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace};
use crate::kernel::{markov_footprint, Kernel};

// precomputed laws for up to this many past neighbors
const CACHED_DEGREE: usize = 8;

/// POMM-Ising kernel on spins `{-1, +1}`:
/// `γ_x(σ | ξ) = exp[βσ(Σ_{y∈∂̲x} ξ_y + h)] / Z_ξ`.
///
/// On `Z²` with the NW order the sum runs over `Nx` and `Wx`.
#[derive(Clone, Debug)]
pub struct IsingKernel {
    beta: f64,
    h: f64,
    colors: ColorSpace,
    // plus_prob[k][m]: P(+1) with k past spins of which m are +1
    plus_prob: Vec<Vec<f64>>,
}

impl IsingKernel {
    pub fn new(beta: f64, h: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        if !h.is_finite() {
            return Err(Error::Domain(format!("field must be finite, got {h}")));
        }
        let plus_prob = (0..=CACHED_DEGREE)
            .map(|k| {
                (0..=k)
                    .map(|m| plus_probability(beta, (2 * m) as f64 - k as f64 + h))
                    .collect()
            })
            .collect();
        Ok(IsingKernel {
            beta,
            h,
            colors: ColorSpace::spins(),
            plus_prob,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn field(&self) -> f64 {
        self.h
    }
}

/// `P(σ = +1)` for local field `s`: `1 / (1 + e^{-2βs})`.
#[inline]
pub(crate) fn plus_probability(beta: f64, s: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * beta * s).exp())
}

impl Kernel for IsingKernel {
    fn label(&self) -> String {
        format!("ising(beta={}, h={})", self.beta, self.h)
    }

    fn colors(&self) -> &ColorSpace {
        &self.colors
    }

    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
        markov_footprint(space, x)
    }

    #[inline]
    fn law(&self, _: &SiteSpace, _: SiteId, past: &[Color], out: &mut [f64]) {
        let k = past.len();
        let m = past.iter().filter(|c| c.0 == 1).count();
        let p = if k <= CACHED_DEGREE {
            self.plus_prob[k][m]
        } else {
            plus_probability(self.beta, (2 * m) as f64 - k as f64 + self.h)
        };
        out[0] = 1.0 - p;
        out[1] = p;
    }

    fn is_homogeneous(&self) -> bool {
        true
    }
}

/// `ε = e^{−2β} / (e^{2β} + e^{−2β})`.
pub fn voter_epsilon(beta: f64) -> f64 {
    1.0 / (1.0 + (4.0 * beta).exp())
}

/// Noisy voter kernel: copy the past color with probability `1 − ε` when
/// all past neighbors agree, otherwise a fair coin.
#[derive(Clone, Debug)]
pub struct VoterKernel {
    epsilon: f64,
    colors: ColorSpace,
}

impl VoterKernel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain(format!("epsilon must lie in [0,1], got {epsilon}")));
        }
        Ok(VoterKernel {
            epsilon,
            colors: ColorSpace::spins(),
        })
    }

    /// The zero-field Ising kernel at inverse temperature `beta`.
    pub fn from_beta(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Self::new(voter_epsilon(beta))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Kernel for VoterKernel {
    fn label(&self) -> String {
        format!("voter(epsilon={})", self.epsilon)
    }

    fn colors(&self) -> &ColorSpace {
        &self.colors
    }

    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
        markov_footprint(space, x)
    }

    fn law(&self, _: &SiteSpace, _: SiteId, past: &[Color], out: &mut [f64]) {
        match past.split_first() {
            Some((first, rest)) if rest.iter().all(|c| c == first) => {
                out[first.index()] = 1.0 - self.epsilon;
                out[1 - first.index()] = self.epsilon;
            }
            _ => {
                out[0] = 0.5;
                out[1] = 0.5;
            }
        }
    }

    fn is_homogeneous(&self) -> bool {
        true
    }
}
