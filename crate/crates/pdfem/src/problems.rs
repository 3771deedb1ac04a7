//! The built-in test problems: coefficients, boundary roles, manufactured
//! solutions and derived data.
//!
//! All problems live on the unit square and share the polynomial reference
//! solution u(x,y) = 30 x(1-x) y(1-y) (of unit L2 norm). The pure-Neumann
//! problem uses its zero-mean shift, since the discrete solution is pinned to
//! zero mean by Lagrange multipliers. Right-hand sides are written out in
//! closed form rather than composed from the solution derivatives, so the
//! manufactured-consistency tests cross two independent derivations.

use crate::assembly::StabilisationParams;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Vec2};
use std::collections::BTreeMap;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
/// Boundary datum depending on the evaluation point and the outward normal.
pub type FluxFn = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;

/// What a boundary side means for a given problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryRole {
    /// Dirichlet value imposed weakly via Nitsche terms plus penalty.
    StrongData,
    /// Total-flux condition imposed via penalty only.
    NeumannData,
    /// Both value and normal flux prescribed (primal data side Γ_V).
    CauchyData,
    /// No data; the adjoint penalty acts here (Γ_W).
    Free,
}

/// Which discrete bilinear form realises the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    /// Conservative convection-diffusion volume form with Nitsche-Dirichlet
    /// boundary terms and inflow treatment.
    DirichletCd,
    /// Nonconservative volume form (μ∇u,∇v) − (u, β·∇v); no boundary terms.
    NeumannCd,
    /// Diffusion Nitsche structure split between the data side Γ_V and the
    /// free side Γ_W, with the convective trace kept on Γ_W.
    Cauchy,
}

/// Manufactured solution with analytic derivatives.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarFn,
    pub gradient: VectorFn,
    pub laplacian: ScalarFn,
}

impl ExactSolution {
    pub fn new(
        value: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        laplacian: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            laplacian: Arc::new(laplacian),
        }
    }

    /// The zero solution, useful for uniqueness checks.
    pub fn zero() -> Self {
        Self::new(|_| 0.0, |_| Vec2::new(0.0, 0.0), |_| 0.0)
    }
}

/// One fully specified test problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    /// Diffusion coefficient μ > 0.
    pub mu: f64,
    /// Helmholtz shift κ.
    pub kappa: f64,
    /// Convection field and its divergence; `None` means β ≡ 0.
    pub beta: Option<VectorFn>,
    pub div_beta: Option<ScalarFn>,
    /// Reaction coefficient; `None` means c ≡ 0.
    pub c: Option<ScalarFn>,
    pub form: FormKind,
    pub boundary_config: BTreeMap<BoundaryTag, BoundaryRole>,
    pub exact: ExactSolution,
    /// Manufactured source.
    pub f: ScalarFn,
    /// Boundary value datum (Dirichlet / Cauchy value).
    pub g_d: ScalarFn,
    /// Boundary flux datum; its meaning depends on the role (total flux
    /// −μ∇u·n + β·n u for Neumann sides, diffusive flux μ∇u·n for Cauchy
    /// sides).
    pub g_n: FluxFn,
    pub stab: StabilisationParams,
    pub needs_mean_constraint: bool,
    /// Whether the formal adjoint operator may be used (GLS adjoint side).
    pub adjoint_configured: bool,
}

impl ProblemSpec {
    /// Role of a boundary face, by tag.
    pub fn role(&self, tag: BoundaryTag) -> Option<BoundaryRole> {
        self.boundary_config.get(&tag).copied()
    }

    pub fn beta_at(&self, p: Vec2) -> Vec2 {
        self.beta.as_ref().map(|b| b(p)).unwrap_or(Vec2::new(0.0, 0.0))
    }

    pub fn div_beta_at(&self, p: Vec2) -> f64 {
        self.div_beta.as_ref().map(|d| d(p)).unwrap_or(0.0)
    }

    pub fn c_at(&self, p: Vec2) -> f64 {
        self.c.as_ref().map(|c| c(p)).unwrap_or(0.0)
    }

    /// Zeroth-order coefficient of the strong operator: ∇·β + c + κ.
    pub fn reaction_at(&self, p: Vec2) -> f64 {
        self.div_beta_at(p) + self.c_at(p) + self.kappa
    }

    /// Strong primal operator L u = −μΔu + ∇·(βu) + cu + κu applied to
    /// point data (value, gradient, Laplacian).
    pub fn strong_primal(&self, p: Vec2, value: f64, grad: Vec2, lap: f64) -> f64 {
        -self.mu * lap + self.beta_at(p).dot(grad) + self.reaction_at(p) * value
    }

    /// Strong adjoint operator L* z = −μΔz − β·∇z + cz + κz.
    pub fn strong_adjoint(&self, p: Vec2, value: f64, grad: Vec2, lap: f64) -> f64 {
        -self.mu * lap - self.beta_at(p).dot(grad) + (self.c_at(p) + self.kappa) * value
    }

    /// Interior-penalty face weights (w1, w2): the gradient-jump weight is
    /// μ + h_F ‖β·n_F‖_∞ (sampled at quadrature points and endpoints, exact
    /// here because every built-in β is affine), the Laplacian-jump weight μ.
    pub fn face_weights(&self, h_f: f64, normal: Vec2, sample_points: &[Vec2]) -> (f64, f64) {
        let mut beta_n: f64 = 0.0;
        if self.beta.is_some() {
            for &p in sample_points {
                beta_n = beta_n.max(self.beta_at(p).dot(normal).abs());
            }
        }
        (self.mu + h_f * beta_n, self.mu)
    }

    /// Replaces the exact solution and rederives all manufactured data from
    /// the operator coefficients. Used by the polynomial exactness tests.
    pub fn with_exact(&self, exact: ExactSolution) -> ProblemSpec {
        let mut out = self.clone();
        out.exact = exact.clone();
        out.f = derived_source(self, &exact);
        out.g_d = exact.value.clone();
        out.g_n = derived_flux(self, &exact);
        out
    }

    /// Checks the boundary configuration covers every side exactly once.
    pub fn validate(&self) -> Result<()> {
        for tag in BoundaryTag::ALL {
            if !self.boundary_config.contains_key(&tag) {
                return Err(Error::Config(format!(
                    "problem '{}' assigns no role to boundary {tag:?}",
                    self.name
                )));
            }
        }
        if self.mu <= 0.0 {
            return Err(Error::Config("diffusion coefficient must be positive".into()));
        }
        self.stab.validate()?;
        Ok(())
    }
}

/// Source f = L(exact), composed from the solution derivatives.
fn derived_source(problem: &ProblemSpec, exact: &ExactSolution) -> ScalarFn {
    let p = problem.clone();
    let e = exact.clone();
    Arc::new(move |x| p.strong_primal(x, (e.value)(x), (e.gradient)(x), (e.laplacian)(x)))
}

/// Flux datum of the exact solution, role-dependent through the form kind.
fn derived_flux(problem: &ProblemSpec, exact: &ExactSolution) -> FluxFn {
    let e = exact.clone();
    let mu = problem.mu;
    let beta = problem.beta.clone();
    match problem.form {
        // Total flux −μ∇u·n + (β·n) u.
        FormKind::NeumannCd => Arc::new(move |x, n| {
            let bn = beta.as_ref().map(|b| b(x).dot(n)).unwrap_or(0.0);
            -mu * (e.gradient)(x).dot(n) + bn * (e.value)(x)
        }),
        // Diffusive flux μ∇u·n (Cauchy data); Dirichlet problems carry the
        // same flux datum although their assembly never reads it.
        _ => Arc::new(move |x, n| mu * (e.gradient)(x).dot(n)),
    }
}

/// The velocity field β = −100 (x+y, y−x) used by all convection problems.
fn rotating_beta() -> (VectorFn, ScalarFn) {
    (
        Arc::new(|p: Vec2| Vec2::new(-100.0 * (p.x + p.y), -100.0 * (p.y - p.x))),
        Arc::new(|_| -200.0),
    )
}

/// u(x,y) = 30 x(1-x) y(1-y); ‖u‖ = 1 and u = 0 on ∂Ω.
fn bubble_solution(shift: f64) -> ExactSolution {
    ExactSolution::new(
        move |p: Vec2| 30.0 * p.x * (1.0 - p.x) * p.y * (1.0 - p.y) - shift,
        |p: Vec2| {
            Vec2::new(
                30.0 * (1.0 - 2.0 * p.x) * p.y * (1.0 - p.y),
                30.0 * p.x * (1.0 - p.x) * (1.0 - 2.0 * p.y),
            )
        },
        |p: Vec2| -60.0 * (p.y * (1.0 - p.y) + p.x * (1.0 - p.x)),
    )
}

fn all_sides(role: BoundaryRole) -> BTreeMap<BoundaryTag, BoundaryRole> {
    BoundaryTag::ALL.iter().map(|&t| (t, role)).collect()
}

/// Convection–diffusion with homogeneous Dirichlet conditions:
/// −Δu + ∇·(βu) = f, u = 0 on ∂Ω, β = −100 (x+y, y−x).
pub fn make_dirichlet_cd(degree: usize) -> ProblemSpec {
    let (beta, div_beta) = rotating_beta();
    let exact = bubble_solution(0.0);
    // f = −Δu + (∇·β) u + β·∇u, written out by hand.
    let f: ScalarFn = Arc::new(|p: Vec2| {
        let (x, y) = (p.x, p.y);
        60.0 * (x * (1.0 - x) + y * (1.0 - y)) - 6000.0 * x * (1.0 - x) * y * (1.0 - y)
            - 3000.0
                * ((x + y) * (1.0 - 2.0 * x) * y * (1.0 - y)
                    + (y - x) * x * (1.0 - x) * (1.0 - 2.0 * y))
    });
    let mut spec = ProblemSpec {
        name: "dirichlet-cd".into(),
        mu: 1.0,
        kappa: 0.0,
        beta: Some(beta),
        div_beta: Some(div_beta),
        c: None,
        form: FormKind::DirichletCd,
        boundary_config: all_sides(BoundaryRole::StrongData),
        exact: exact.clone(),
        f,
        g_d: exact.value.clone(),
        g_n: Arc::new(|_, _| 0.0),
        stab: StabilisationParams::defaults_for(degree),
        needs_mean_constraint: false,
        adjoint_configured: true,
    };
    spec.g_n = derived_flux(&spec, &exact);
    spec
}

/// Convection–diffusion with non-homogeneous total-flux (Neumann-type)
/// conditions on all of ∂Ω. The solution is fixed to zero mean by Lagrange
/// multipliers, so the manufactured solution is the zero-mean shift of the
/// bubble (its mean is 5/6) and all data derive from the shifted solution.
pub fn make_neumann_cd(degree: usize) -> ProblemSpec {
    let (beta, div_beta) = rotating_beta();
    let exact = bubble_solution(5.0 / 6.0);
    // f = −Δū + ∇·(βū) with ū = u − 5/6; the shift adds (∇·β)(−5/6) = +500/3.
    let f: ScalarFn = Arc::new(|p: Vec2| {
        let (x, y) = (p.x, p.y);
        60.0 * (x * (1.0 - x) + y * (1.0 - y)) - 6000.0 * x * (1.0 - x) * y * (1.0 - y)
            - 3000.0
                * ((x + y) * (1.0 - 2.0 * x) * y * (1.0 - y)
                    + (y - x) * x * (1.0 - x) * (1.0 - 2.0 * y))
            + 500.0 / 3.0
    });
    let mut spec = ProblemSpec {
        name: "neumann-cd".into(),
        mu: 1.0,
        kappa: 0.0,
        beta: Some(beta),
        div_beta: Some(div_beta),
        c: None,
        form: FormKind::NeumannCd,
        boundary_config: all_sides(BoundaryRole::NeumannData),
        exact: exact.clone(),
        f,
        g_d: exact.value.clone(),
        g_n: Arc::new(|_, _| 0.0),
        stab: StabilisationParams::defaults_for(degree),
        needs_mean_constraint: true,
        adjoint_configured: true,
    };
    spec.g_n = derived_flux(&spec, &exact);
    spec
}

/// Cauchy problem for Poisson's equation: −Δu = f with both value and flux
/// prescribed on Γ_V = {x=0} ∪ {y=1}; nothing is known on the other sides.
pub fn make_cauchy_poisson(degree: usize) -> ProblemSpec {
    let exact = bubble_solution(0.0);
    let f: ScalarFn = Arc::new(|p: Vec2| 60.0 * (p.x * (1.0 - p.x) + p.y * (1.0 - p.y)));
    let mut config = BTreeMap::new();
    config.insert(BoundaryTag::Left, BoundaryRole::CauchyData);
    config.insert(BoundaryTag::Top, BoundaryRole::CauchyData);
    config.insert(BoundaryTag::Bottom, BoundaryRole::Free);
    config.insert(BoundaryTag::Right, BoundaryRole::Free);
    let mut spec = ProblemSpec {
        name: "cauchy-poisson".into(),
        mu: 1.0,
        kappa: 0.0,
        beta: None,
        div_beta: None,
        c: None,
        form: FormKind::Cauchy,
        boundary_config: config,
        exact: exact.clone(),
        f,
        g_d: exact.value.clone(),
        g_n: Arc::new(|_, _| 0.0),
        stab: StabilisationParams::defaults_for(degree),
        needs_mean_constraint: false,
        adjoint_configured: true,
    };
    spec.g_n = derived_flux(&spec, &exact);
    spec
}

/// Cauchy problem for the noncoercive convection–diffusion operator.
/// Case 1 places the data on the mixed boundaries x=0 and y=1, case 2 on the
/// two inflow boundaries y=0 and x=1.
pub fn make_cauchy_cd(case: usize, degree: usize) -> Result<ProblemSpec> {
    let data_sides = match case {
        1 => [BoundaryTag::Left, BoundaryTag::Top],
        2 => [BoundaryTag::Bottom, BoundaryTag::Right],
        _ => {
            return Err(Error::Config(format!(
                "cauchy-cd case must be 1 or 2, got {case}"
            )))
        }
    };
    let (beta, div_beta) = rotating_beta();
    let exact = bubble_solution(0.0);
    // Same operator and solution as the Dirichlet problem, hence the same f.
    let f: ScalarFn = Arc::new(|p: Vec2| {
        let (x, y) = (p.x, p.y);
        60.0 * (x * (1.0 - x) + y * (1.0 - y)) - 6000.0 * x * (1.0 - x) * y * (1.0 - y)
            - 3000.0
                * ((x + y) * (1.0 - 2.0 * x) * y * (1.0 - y)
                    + (y - x) * x * (1.0 - x) * (1.0 - 2.0 * y))
    });
    let mut config = all_sides(BoundaryRole::Free);
    for side in data_sides {
        config.insert(side, BoundaryRole::CauchyData);
    }
    let mut spec = ProblemSpec {
        name: format!("cauchy-cd-case{case}"),
        mu: 1.0,
        kappa: 0.0,
        beta: Some(beta),
        div_beta: Some(div_beta),
        c: None,
        form: FormKind::Cauchy,
        boundary_config: config,
        exact: exact.clone(),
        f,
        g_d: exact.value.clone(),
        g_n: Arc::new(|_, _| 0.0),
        stab: StabilisationParams::defaults_for(degree),
        needs_mean_constraint: false,
        adjoint_configured: true,
    };
    spec.g_n = derived_flux(&spec, &exact);
    Ok(spec)
}

/// All built-in problems by CLI name.
pub fn by_name(name: &str, degree: usize) -> Result<ProblemSpec> {
    match name {
        "dirichlet-cd" => Ok(make_dirichlet_cd(degree)),
        "neumann-cd" => Ok(make_neumann_cd(degree)),
        "cauchy-poisson" => Ok(make_cauchy_poisson(degree)),
        "cauchy-cd-case1" => make_cauchy_cd(1, degree),
        "cauchy-cd-case2" => make_cauchy_cd(2, degree),
        other => Err(Error::Config(format!(
            "unknown problem '{other}'; expected one of dirichlet-cd, neumann-cd, \
             cauchy-poisson, cauchy-cd-case1, cauchy-cd-case2"
        ))),
    }
}
