//! Perturbed systems `q' = H_p + ε f_q`, `p' = −H_q + ε f_p`, `z' = ε f_z`.
//!
//! A [`SystemDef`] wraps either a built-in catalog model or expression strings
//! from a model file. Mode handling lives here: in the time-dependent
//! Hamiltonian mode `z = (τ)` with `f_z ≡ 1` and no `(p, q)` forcing, and in the
//! slow-fast mode `z = (y, x)` with `f_z = (−∂H/∂x, ∂H/∂y)`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exprdsl::{self, Compiled, Expr, Scope};
use crate::portrait::SaddleChart;
use crate::{Error, Result};

pub const MAX_Z: usize = 4;
pub type ZVec = [f64; MAX_Z];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Generic,
    HamiltonianTime,
    SlowFast,
}

/// `H` and its first partial derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct Grad {
    pub h: f64,
    pub hp: f64,
    pub hq: f64,
    pub hz: ZVec,
}

/// Second derivatives of `H` in `(p, q)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hess {
    pub pp: f64,
    pub pq: f64,
    pub qq: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Pert {
    pub fp: f64,
    pub fq: f64,
    pub fz: ZVec,
}

pub trait Kernel: Send + Sync {
    fn grad(&self, p: f64, q: f64, z: &[f64]) -> Result<Grad>;
    fn hess(&self, p: f64, q: f64, z: &[f64]) -> Result<Hess>;
    /// Generic-mode perturbation; ignored in the Hamiltonian modes.
    fn pert(&self, p: f64, q: f64, z: &[f64], eps: f64) -> Result<Pert>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub p: [f64; 2],
    pub q: [f64; 2],
    pub z: Vec<[f64; 2]>,
}

impl PhaseBox {
    pub fn wide(dim_z: usize) -> Self {
        PhaseBox {
            p: [-10.0, 10.0],
            q: [-10.0, 10.0],
            z: vec![[-1e6, 1e6]; dim_z],
        }
    }

    pub fn check(&self, p: f64, q: f64, z: &[f64]) -> Result<()> {
        let inside = |x: f64, r: [f64; 2]| x >= r[0] && x <= r[1];
        if !inside(p, self.p) || !inside(q, self.q) {
            return Err(Error::BoxExit(format!("(p, q) = ({p}, {q})")));
        }
        for (k, (&zk, r)) in z.iter().zip(&self.z).enumerate() {
            if !inside(zk, *r) {
                return Err(Error::BoxExit(format!("z{} = {zk}", k + 1)));
            }
        }
        Ok(())
    }
}

/// Orientation of the section rays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SectionConfig {
    pub flip: bool,
    pub rotate_deg: f64,
}

#[derive(Clone)]
pub struct SystemDef {
    pub name: String,
    pub dim_z: usize,
    pub mode: Mode,
    pub z_names: Vec<String>,
    pub params: BTreeMap<String, f64>,
    pub phase_box: PhaseBox,
    pub sections: SectionConfig,
    /// Newton seed for the saddle.
    pub saddle_seed: [f64; 2],
    /// Characteristic size of the separatrix loops.
    pub scale: f64,
    /// Slow-variable point used when none is given.
    pub default_z: Vec<f64>,
    kernel: Arc<dyn Kernel>,
}

impl std::fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("dim_z", &self.dim_z)
            .field("mode", &self.mode)
            .field("params", &self.params)
            .finish()
    }
}

impl SystemDef {
    pub fn grad(&self, p: f64, q: f64, z: &[f64]) -> Result<Grad> {
        self.phase_box.check(p, q, z)?;
        self.kernel.grad(p, q, z)
    }

    pub fn hess(&self, p: f64, q: f64, z: &[f64]) -> Result<Hess> {
        self.phase_box.check(p, q, z)?;
        self.kernel.hess(p, q, z)
    }

    pub fn hamiltonian(&self, p: f64, q: f64, z: &[f64]) -> Result<f64> {
        Ok(self.grad(p, q, z)?.h)
    }

    /// Perturbation with the mode structure applied; `g` is `grad(p, q, z)`.
    pub fn pert_with(&self, g: &Grad, p: f64, q: f64, z: &[f64], eps: f64) -> Result<Pert> {
        match self.mode {
            Mode::Generic => self.kernel.pert(p, q, z, eps),
            Mode::HamiltonianTime => {
                let mut fz = [0.0; MAX_Z];
                fz[0] = 1.0;
                Ok(Pert { fp: 0.0, fq: 0.0, fz })
            }
            Mode::SlowFast => {
                let mut fz = [0.0; MAX_Z];
                fz[0] = -g.hz[1];
                fz[1] = g.hz[0];
                Ok(Pert { fp: 0.0, fq: 0.0, fz })
            }
        }
    }

    pub fn pert(&self, p: f64, q: f64, z: &[f64], eps: f64) -> Result<Pert> {
        let g = self.grad(p, q, z)?;
        self.pert_with(&g, p, q, z, eps)
    }

    /// Full vector field on the state `[p, q, z1..zk]`.
    pub fn flow(&self, y: &[f64], eps: f64, dy: &mut [f64]) -> Result<()> {
        let (p, q, z) = (y[0], y[1], &y[2..2 + self.dim_z]);
        let g = self.grad(p, q, z)?;
        let f = self.pert_with(&g, p, q, z, eps)?;
        dy[0] = -g.hq + eps * f.fp;
        dy[1] = g.hp + eps * f.fq;
        for k in 0..self.dim_z {
            dy[2 + k] = eps * f.fz[k];
        }
        Ok(())
    }

    pub fn is_hamiltonian(&self) -> bool {
        matches!(self.mode, Mode::HamiltonianTime | Mode::SlowFast)
    }
}

/// Derived quantities at one phase point; perturbations taken at `ε = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSample {
    pub h: f64,
    pub h_c: f64,
    pub e: f64,
    pub e_p: f64,
    pub e_q: f64,
    pub e_z: Vec<f64>,
    pub f_h: f64,
    pub f_z: Vec<f64>,
    pub f_zc: Vec<f64>,
    pub big_f_z: Vec<f64>,
}

pub fn derived_fields(sys: &SystemDef, chart: &SaddleChart, p: f64, q: f64) -> Result<FieldSample> {
    let z = &chart.z;
    let g = sys.grad(p, q, z)?;
    let f = sys.pert_with(&g, p, q, z, 0.0)?;
    let k = sys.dim_z;
    let e_z: Vec<f64> = (0..k).map(|j| g.hz[j] - chart.grad_hc[j]).collect();
    let f_h = g.hp * f.fp + g.hq * f.fq + (0..k).map(|j| e_z[j] * f.fz[j]).sum::<f64>();
    Ok(FieldSample {
        h: g.h,
        h_c: chart.h_c,
        e: g.h - chart.h_c,
        e_p: g.hp,
        e_q: g.hq,
        f_h,
        f_z: f.fz[..k].to_vec(),
        f_zc: chart.f_zc[..k].to_vec(),
        big_f_z: (0..k).map(|j| f.fz[j] - chart.f_zc[j]).collect(),
        e_z,
    })
}

// ---------------------------------------------------------------------------
// Catalog kernels.

struct DuffingDissipative {
    gamma: f64,
}

impl Kernel for DuffingDissipative {
    fn grad(&self, p: f64, q: f64, _z: &[f64]) -> Result<Grad> {
        let q2 = q * q;
        Ok(Grad {
            h: 0.5 * p * p - 0.5 * q2 + 0.25 * q2 * q2,
            hp: p,
            hq: -q + q2 * q,
            hz: [0.0; MAX_Z],
        })
    }

    fn hess(&self, _p: f64, q: f64, _z: &[f64]) -> Result<Hess> {
        Ok(Hess {
            pp: 1.0,
            pq: 0.0,
            qq: -1.0 + 3.0 * q * q,
        })
    }

    fn pert(&self, p: f64, _q: f64, _z: &[f64], _eps: f64) -> Result<Pert> {
        let mut fz = [0.0; MAX_Z];
        fz[0] = 1.0;
        Ok(Pert {
            fp: -self.gamma * p,
            fq: 0.0,
            fz,
        })
    }
}

struct DuffingBreathing {
    c: f64,
    rate: f64,
}

impl Kernel for DuffingBreathing {
    fn grad(&self, p: f64, q: f64, z: &[f64]) -> Result<Grad> {
        let zeta = 1.0 + self.rate * z[0];
        let q2 = q * q;
        let v = -0.5 * q2 + self.c * q2 * q / 3.0 + 0.25 * q2 * q2;
        let dv = -q + self.c * q2 + q2 * q;
        let mut hz = [0.0; MAX_Z];
        hz[0] = self.rate * v;
        Ok(Grad {
            h: 0.5 * p * p + zeta * v,
            hp: p,
            hq: zeta * dv,
            hz,
        })
    }

    fn hess(&self, _p: f64, q: f64, z: &[f64]) -> Result<Hess> {
        let zeta = 1.0 + self.rate * z[0];
        Ok(Hess {
            pp: 1.0,
            pq: 0.0,
            qq: zeta * (-1.0 + 2.0 * self.c * q + 3.0 * q * q),
        })
    }

    fn pert(&self, _p: f64, _q: f64, _z: &[f64], _eps: f64) -> Result<Pert> {
        Ok(Pert::default())
    }
}

/// `H = p²/2 − q²/2 + q⁴/4 + x q + y²/2` with `z = (y, x)`.
struct DuffingSlowFast;

impl Kernel for DuffingSlowFast {
    fn grad(&self, p: f64, q: f64, z: &[f64]) -> Result<Grad> {
        let (y, x) = (z[0], z[1]);
        let q2 = q * q;
        let mut hz = [0.0; MAX_Z];
        hz[0] = y;
        hz[1] = q;
        Ok(Grad {
            h: 0.5 * p * p - 0.5 * q2 + 0.25 * q2 * q2 + x * q + 0.5 * y * y,
            hp: p,
            hq: -q + q2 * q + x,
            hz,
        })
    }

    fn hess(&self, _p: f64, q: f64, _z: &[f64]) -> Result<Hess> {
        Ok(Hess {
            pp: 1.0,
            pq: 0.0,
            qq: -1.0 + 3.0 * q * q,
        })
    }

    fn pert(&self, _p: f64, _q: f64, _z: &[f64], _eps: f64) -> Result<Pert> {
        Ok(Pert::default())
    }
}

/// `H = p²/2 − x q²/2 + α y q³/3 + q⁴/4 + y²/2` with `z = (y, x)`.
struct DuffingSlowFastDeepening {
    alpha: f64,
}

impl Kernel for DuffingSlowFastDeepening {
    fn grad(&self, p: f64, q: f64, z: &[f64]) -> Result<Grad> {
        let (y, x) = (z[0], z[1]);
        let a = self.alpha;
        let q2 = q * q;
        let q3 = q2 * q;
        let mut hz = [0.0; MAX_Z];
        hz[0] = a * q3 / 3.0 + y;
        hz[1] = -0.5 * q2;
        Ok(Grad {
            h: 0.5 * p * p - 0.5 * x * q2 + a * y * q3 / 3.0 + 0.25 * q2 * q2 + 0.5 * y * y,
            hp: p,
            hq: -x * q + a * y * q2 + q3,
            hz,
        })
    }

    fn hess(&self, _p: f64, q: f64, z: &[f64]) -> Result<Hess> {
        let (y, x) = (z[0], z[1]);
        Ok(Hess {
            pp: 1.0,
            pq: 0.0,
            qq: -x + 2.0 * self.alpha * y * q + 3.0 * q * q,
        })
    }

    fn pert(&self, _p: f64, _q: f64, _z: &[f64], _eps: f64) -> Result<Pert> {
        Ok(Pert::default())
    }
}

// ---------------------------------------------------------------------------
// Expression kernels.

struct ExprKernel {
    dim_z: usize,
    h: Compiled,
    hp: Compiled,
    hq: Compiled,
    hz: Vec<Compiled>,
    hpp: Compiled,
    hpq: Compiled,
    hqq: Compiled,
    fp: Compiled,
    fq: Compiled,
    fz: Vec<Compiled>,
}

impl ExprKernel {
    fn slots(&self, p: f64, q: f64, z: &[f64], eps: f64) -> [f64; MAX_Z + 3] {
        let mut s = [0.0; MAX_Z + 3];
        s[0] = p;
        s[1] = q;
        s[2..2 + self.dim_z].copy_from_slice(&z[..self.dim_z]);
        s[2 + self.dim_z] = eps;
        s
    }
}

impl Kernel for ExprKernel {
    fn grad(&self, p: f64, q: f64, z: &[f64]) -> Result<Grad> {
        let s = self.slots(p, q, z, 0.0);
        let mut hz = [0.0; MAX_Z];
        for (k, e) in self.hz.iter().enumerate() {
            hz[k] = e.eval(&s)?;
        }
        Ok(Grad {
            h: self.h.eval(&s)?,
            hp: self.hp.eval(&s)?,
            hq: self.hq.eval(&s)?,
            hz,
        })
    }

    fn hess(&self, p: f64, q: f64, z: &[f64]) -> Result<Hess> {
        let s = self.slots(p, q, z, 0.0);
        Ok(Hess {
            pp: self.hpp.eval(&s)?,
            pq: self.hpq.eval(&s)?,
            qq: self.hqq.eval(&s)?,
        })
    }

    fn pert(&self, p: f64, q: f64, z: &[f64], eps: f64) -> Result<Pert> {
        let s = self.slots(p, q, z, eps);
        let mut fz = [0.0; MAX_Z];
        for (k, e) in self.fz.iter().enumerate() {
            fz[k] = e.eval(&s)?;
        }
        Ok(Pert {
            fp: self.fp.eval(&s)?,
            fq: self.fq.eval(&s)?,
            fz,
        })
    }
}

// ---------------------------------------------------------------------------
// Configuration.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Catalog name; when absent the expression keys are required.
    pub name: Option<String>,
    pub mode: Option<Mode>,
    /// Names of the slow variables, `z1..zk` by default.
    pub z: Option<Vec<String>>,
    #[serde(rename = "H")]
    pub hamiltonian: Option<String>,
    pub f_p: Option<String>,
    pub f_q: Option<String>,
    pub f_z: Option<Vec<String>>,
    pub saddle_seed: Option<[f64; 2]>,
    pub scale: Option<f64>,
    /// Default slow-variable point.
    pub z0: Option<Vec<f64>>,
}

/// Contents of a TOML model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "box")]
    pub phase_box: Option<PhaseBox>,
    #[serde(default)]
    pub sections: SectionConfig,
}

impl ModelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn catalog(name: &str) -> Self {
        ModelConfig {
            model: ModelSection {
                name: Some(name.to_string()),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

pub const CATALOG: &[&str] = &[
    "duffing_dissipative",
    "duffing_breathing_asym",
    "duffing_slowfast",
    "duffing_slowfast_deepening",
];

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

pub fn build_system(config: &ModelConfig) -> Result<SystemDef> {
    let m = &config.model;
    let mut params = config.params.clone();
    let (name, dim_z, mode, z_names, kernel, seed, scale): (
        String,
        usize,
        Mode,
        Vec<String>,
        Arc<dyn Kernel>,
        [f64; 2],
        f64,
    ) = match m.name.as_deref() {
        Some(name) if m.hamiltonian.is_none() => {
            let z1 = |s: &str| vec![s.to_string()];
            let yx = vec!["y".to_string(), "x".to_string()];
            match name {
                "duffing_dissipative" => {
                    let gamma = param(&params, "gamma", 1.0);
                    params.insert("gamma".into(), gamma);
                    let k = Arc::new(DuffingDissipative { gamma });
                    (name.into(), 1, Mode::Generic, z1("tau"), k, [0.1, 0.1], 1.0)
                }
                "duffing_breathing_asym" => {
                    let c = param(&params, "c", 0.2);
                    let rate = param(&params, "rate", 0.5);
                    params.insert("c".into(), c);
                    params.insert("rate".into(), rate);
                    let k = Arc::new(DuffingBreathing { c, rate });
                    (name.into(), 1, Mode::HamiltonianTime, z1("tau"), k, [0.1, 0.1], 1.0)
                }
                "duffing_slowfast" => {
                    let k = Arc::new(DuffingSlowFast);
                    (name.into(), 2, Mode::SlowFast, yx, k, [0.0, 0.0], 1.0)
                }
                "duffing_slowfast_deepening" => {
                    let alpha = param(&params, "alpha", 0.5);
                    params.insert("alpha".into(), alpha);
                    let k = Arc::new(DuffingSlowFastDeepening { alpha });
                    (name.into(), 2, Mode::SlowFast, yx, k, [0.0, 0.0], 1.0)
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown catalog model `{other}` (known: {})",
                        CATALOG.join(", ")
                    )))
                }
            }
        }
        _ => build_expression_kernel(config)?,
    };
    let mode = m.mode.unwrap_or(mode);
    check_mode(mode, dim_z)?;
    let phase_box = config.phase_box.clone().unwrap_or_else(|| PhaseBox::wide(dim_z));
    if phase_box.z.len() != dim_z {
        return Err(Error::Config(format!(
            "box.z has {} ranges for dim_z = {dim_z}",
            phase_box.z.len()
        )));
    }
    let default_z = match (&m.z0, name.as_str()) {
        (Some(z0), _) => z0.clone(),
        (None, "duffing_slowfast_deepening") if m.hamiltonian.is_none() => vec![0.3, 1.0],
        (None, _) => vec![0.0; dim_z],
    };
    if default_z.len() != dim_z {
        return Err(Error::Config(format!("z0 has {} entries for dim_z = {dim_z}", default_z.len())));
    }
    Ok(SystemDef {
        default_z,
        name,
        dim_z,
        mode,
        z_names,
        params,
        phase_box,
        sections: config.sections,
        saddle_seed: m.saddle_seed.unwrap_or(seed),
        scale: m.scale.unwrap_or(scale),
        kernel,
    })
}

fn check_mode(mode: Mode, dim_z: usize) -> Result<()> {
    if dim_z == 0 || dim_z > MAX_Z {
        return Err(Error::Config(format!("dim_z = {dim_z} outside 1..={MAX_Z}")));
    }
    match mode {
        Mode::HamiltonianTime if dim_z != 1 => Err(Error::Config(
            "hamiltonian_time mode needs exactly one slow variable".into(),
        )),
        Mode::SlowFast if dim_z != 2 => Err(Error::Config(
            "slow_fast mode needs z = (y, x)".into(),
        )),
        _ => Ok(()),
    }
}

#[allow(clippy::type_complexity)]
fn build_expression_kernel(
    config: &ModelConfig,
) -> Result<(String, usize, Mode, Vec<String>, Arc<dyn Kernel>, [f64; 2], f64)> {
    let m = &config.model;
    let h_text = m
        .hamiltonian
        .as_deref()
        .ok_or_else(|| Error::Config("model needs `name` or `H`".into()))?;
    let mode = m.mode.unwrap_or_default();
    let dim_z = match (&m.z, &m.f_z) {
        (Some(names), _) => names.len(),
        (None, Some(f)) => f.len(),
        (None, None) => match mode {
            Mode::SlowFast => 2,
            _ => 1,
        },
    };
    check_mode(mode, dim_z)?;
    let z_names: Vec<String> = m
        .z
        .clone()
        .unwrap_or_else(|| (1..=dim_z).map(|k| format!("z{k}")).collect());
    if mode == Mode::Generic {
        let nf = m.f_z.as_ref().map_or(0, |f| f.len());
        if nf != dim_z {
            return Err(Error::Config(format!(
                "inconsistent dim_z: {dim_z} slow variables but {nf} f_z entries"
            )));
        }
    }
    let canonical: Vec<String> = (1..=dim_z).map(|k| format!("z{k}")).collect();
    let mut vars: Vec<String> = vec!["p".into(), "q".into()];
    let mut rename = HashMap::new();
    for (k, n) in z_names.iter().enumerate() {
        vars.push(n.clone());
        rename.insert(n.clone(), canonical[k].clone());
        if !vars.contains(&canonical[k]) {
            vars.push(canonical[k].clone());
        }
    }
    if !vars.iter().any(|v| v == "tau") {
        vars.push("tau".into());
        rename.insert("tau".into(), "z1".into());
    }
    vars.push("eps".into());
    let mut scope = Scope::new(&vars);
    for (k, v) in &config.params {
        scope = scope.with_constant(k, *v);
    }
    let parse = |text: &str| -> Result<Expr> {
        Ok(exprdsl::fold(exprdsl::parse(text, &scope)?.rename(&rename)))
    };
    let mut slot_names: Vec<&str> = vec!["p", "q"];
    slot_names.extend(canonical.iter().map(|s| s.as_str()));
    slot_names.push("eps");
    let canon_scope = Scope::new(&slot_names);
    let d = |e: &Expr, v: &str| -> Result<Expr> { Ok(exprdsl::fold(e.differentiate(v, &canon_scope)?)) };
    let compile = |e: &Expr| -> Result<Compiled> { Ok(e.compile(&slot_names)?) };
    let h = parse(h_text)?;
    if h.free_variables().iter().any(|v| v == "eps") {
        return Err(Error::Config("H must not depend on eps".into()));
    }
    let hp = d(&h, "p")?;
    let hq = d(&h, "q")?;
    let zero = Expr::Const(0.0);
    let fp = match (&m.f_p, mode) {
        (Some(t), Mode::Generic) => parse(t)?,
        _ => zero.clone(),
    };
    let fq = match (&m.f_q, mode) {
        (Some(t), Mode::Generic) => parse(t)?,
        _ => zero.clone(),
    };
    let fz: Vec<Expr> = match (&m.f_z, mode) {
        (Some(ts), Mode::Generic) => ts.iter().map(|t| parse(t)).collect::<Result<_>>()?,
        _ => vec![zero.clone(); dim_z],
    };
    let kernel = ExprKernel {
        dim_z,
        h: compile(&h)?,
        hpp: compile(&d(&hp, "p")?)?,
        hpq: compile(&d(&hp, "q")?)?,
        hqq: compile(&d(&hq, "q")?)?,
        hp: compile(&hp)?,
        hq: compile(&hq)?,
        hz: canonical
            .iter()
            .map(|z| compile(&d(&h, z)?))
            .collect::<Result<_>>()?,
        fp: compile(&fp)?,
        fq: compile(&fq)?,
        fz: fz.iter().map(compile).collect::<Result<_>>()?,
    };
    let name = m.name.clone().unwrap_or_else(|| "expression".into());
    Ok((
        name,
        dim_z,
        mode,
        z_names,
        Arc::new(kernel),
        m.saddle_seed.unwrap_or([0.0, 0.0]),
        m.scale.unwrap_or(1.0),
    ))
}
