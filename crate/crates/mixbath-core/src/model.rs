use crate::bath::{BathIntegrals, QuadratureSpec};
use crate::error::Result;
use crate::kernels::Kernels;
use crate::polyroots::{build_char_poly, find_roots, CharPoly, RootData};
use crate::scenario::Scenario;

/// Everything precomputed for one scenario: roots, kernel coefficients, bath integrals.
#[derive(Clone, Debug)]
pub struct Model {
    pub scenario: Scenario,
    pub poly: CharPoly,
    pub roots: RootData,
    pub kernels: Kernels,
    pub baths: BathIntegrals,
    pub spec: QuadratureSpec,
    /// Slowest decay rate max Re s_k (0 when decoupled).
    pub sigma: f64,
}

impl Model {
    pub fn new(sc: &Scenario, spec: QuadratureSpec) -> Result<Self> {
        spec.validate(sc)?;
        let poly = build_char_poly(sc);
        let roots = find_roots(&poly)?;
        let decoupled = sc.g0 == 0.0;
        if !decoupled {
            roots.require_stable()?;
        }
        let kernels = Kernels::new(&roots, sc);
        let baths = BathIntegrals::new(&roots, sc, &kernels, spec)?;
        let sigma = if decoupled { 0.0 } else { roots.max_re() };
        Ok(Model {
            scenario: sc.clone(),
            poly,
            roots,
            kernels,
            baths,
            spec,
            sigma,
        })
    }

    pub fn with_defaults(sc: &Scenario) -> Result<Self> {
        Model::new(sc, QuadratureSpec::default_for(sc))
    }
}
