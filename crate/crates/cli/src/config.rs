use std::path::{Path, PathBuf};

use serde::Deserialize;
use spectral_shift::boundary::BoundaryCondition;
use spectral_shift::fse::HalfLineBC;
use spectral_shift::linalg::{Mat2, C64};
use spectral_shift::potentials::{Potential, WeightFunction};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Complex {
    Real(f64),
    Pair([f64; 2]),
}

impl Complex {
    fn value(self) -> C64 {
        match self {
            Complex::Real(x) => C64::new(x, 0.0),
            Complex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default = "zero_kind")]
    pub kind: String,
    pub value: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub amplitude: Option<f64>,
    pub center: Option<f64>,
    pub width: Option<f64>,
    /// Two-column CSV (x, V) for kind = "table".
    pub file: Option<PathBuf>,
    pub scale: Option<f64>,
}

fn zero_kind() -> String {
    "zero".into()
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            kind: zero_kind(),
            value: None,
            left: None,
            right: None,
            amplitude: None,
            center: None,
            width: None,
            file: None,
            scale: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    #[serde(default = "dirichlet")]
    pub preset: String,
    pub theta_right: Option<f64>,
    pub theta_left: Option<f64>,
    pub a: Option<[[Complex; 2]; 2]>,
    pub b: Option<[[Complex; 2]; 2]>,
}

fn dirichlet() -> String {
    "dirichlet".into()
}

impl Default for BoundarySection {
    fn default() -> Self {
        BoundarySection { preset: dirichlet(), theta_right: None, theta_left: None, a: None, b: None }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfLineSection {
    pub a: Complex,
    pub b: Complex,
    pub big_a: Complex,
    pub big_b: Complex,
}

impl Default for HalfLineSection {
    fn default() -> Self {
        HalfLineSection { a: Complex::Real(1.0), b: Complex::Real(0.0), big_a: Complex::Real(1.0), big_b: Complex::Real(0.0) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub nu: f64,
    pub eta: f64,
    pub f: String,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection { nu: 2.0, eta: 0.0, f: "identity".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterSection {
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
}

impl Default for ScatterSection {
    fn default() -> Self {
        ScatterSection { k_min: 0.1, k_max: 10.0, k_step: 0.1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsfSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for SsfSection {
    fn default() -> Self {
        SsfSection { lambda_min: -2.0, lambda_max: 10.0, points: 200 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourSection {
    /// Parabola height; defaults to max(4, ‖V‖₁).
    pub b: Option<f64>,
    pub nodes: usize,
    pub n_det: usize,
}

impl Default for ContourSection {
    fn default() -> Self {
        ContourSection { b: None, nodes: 32, n_det: 400 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxSection {
    /// Half-length of the box [−L, L].
    pub l: f64,
    /// Largest eigenvalue reported; defaults to ν.
    pub cutoff: Option<f64>,
}

impl Default for BoxSection {
    fn default() -> Self {
        BoxSection { l: 25.0, cutoff: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSection {
    pub n_min: u32,
    pub n_max: u32,
    pub n_step: u32,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection { n_min: 10, n_max: 80, n_step: 10 }
    }
}

impl ConvergeSection {
    pub fn indices(&self) -> Vec<u32> {
        (self.n_min..=self.n_max).step_by(self.n_step as usize).collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub ks: Vec<f64>,
    pub z: [f64; 2],
    pub l: f64,
    pub n: usize,
    pub draws: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { ks: vec![0.5, 1.0, std::f64::consts::SQRT_2, 3.0], z: [2.0, 0.5], l: 5.0, n: 400, draws: 20, seed: 7, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub halfline: HalfLineSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub scatter: ScatterSection,
    #[serde(default)]
    pub ssf: SsfSection,
    #[serde(default)]
    pub contour: ContourSection,
    #[serde(default, rename = "box")]
    pub box_: BoxSection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub verify: VerifySection,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub potential: Potential,
    pub bc: BoundaryCondition,
    pub halfline: HalfLineBC,
    pub f: WeightFunction,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let (raw, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                (raw, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (RawConfig::default(), PathBuf::new()),
        };
        Self::from_raw(raw, &base)
    }

    pub fn from_raw(raw: RawConfig, base: &Path) -> Result<Self, ConfigError> {
        let ph = &raw.physics;
        if !(ph.nu > 0.0) || !ph.nu.is_finite() {
            return Err(field_error("physics.nu", format!("must be positive, got {}", ph.nu)));
        }
        if !(-1.0..1.0).contains(&ph.eta) {
            return Err(field_error("physics.eta", format!("must lie in [-1, 1), got {}", ph.eta)));
        }
        let f = WeightFunction::by_name(&ph.f).ok_or_else(|| field_error("physics.f", format!("unknown weight '{}' (identity, square)", ph.f)))?;
        let potential = build_potential(&raw.potential, base)?;
        let bc = build_boundary(&raw.boundary)?;
        let h = raw.halfline;
        let halfline = HalfLineBC::new(h.a.value(), h.b.value(), h.big_a.value(), h.big_b.value()).map_err(|e| field_error("halfline", e))?;
        let s = &raw.scatter;
        if !(s.k_min > 0.0 && s.k_max >= s.k_min && s.k_step > 0.0) {
            return Err(field_error("scatter", "need 0 < k_min ≤ k_max and k_step > 0"));
        }
        if !(raw.ssf.lambda_max > raw.ssf.lambda_min) || raw.ssf.points < 2 {
            return Err(field_error("ssf", "need lambda_min < lambda_max and at least 2 points"));
        }
        if !(raw.box_.l > 0.0) {
            return Err(field_error("box.l", "must be positive"));
        }
        let c = &raw.converge;
        if c.n_step == 0 || c.n_min == 0 || c.n_max < c.n_min {
            return Err(field_error("converge", "need 1 ≤ n_min ≤ n_max and n_step ≥ 1"));
        }
        if raw.contour.nodes < 4 || raw.contour.n_det < 4 {
            return Err(field_error("contour", "nodes and n_det must be at least 4"));
        }
        if raw.contour.b.is_some_and(|b| !(2.0 * b > potential.l1_norm())) {
            return Err(field_error("contour.b", format!("needs 2b > ‖V‖₁ = {}", potential.l1_norm())));
        }
        if !(raw.verify.tol > 0.0) {
            return Err(field_error("verify.tol", "must be positive"));
        }
        Ok(RunConfig { raw, potential, bc, halfline, f })
    }

    pub fn nu(&self) -> f64 {
        self.raw.physics.nu
    }

    pub fn eta(&self) -> f64 {
        self.raw.physics.eta
    }

    /// Contour height: the configured one or max(4, ‖V‖₁).
    pub fn contour_height(&self) -> f64 {
        self.raw.contour.b.unwrap_or_else(|| self.potential.l1_norm().max(4.0))
    }
}

fn require(v: Option<f64>, field: &str) -> Result<f64, ConfigError> {
    v.ok_or_else(|| field_error(field, "missing"))
}

fn build_potential(s: &PotentialSection, base: &Path) -> Result<Potential, ConfigError> {
    let invalid = |e: spectral_shift::Error| field_error("potential", e);
    let p = match s.kind.as_str() {
        "zero" => Potential::zero(),
        "square_well" => Potential::square_well(
            require(s.value, "potential.value")?,
            require(s.left, "potential.left")?,
            require(s.right, "potential.right")?,
        )
        .map_err(invalid)?,
        "gaussian" => Potential::gaussian(
            require(s.amplitude, "potential.amplitude")?,
            s.center.unwrap_or(0.0),
            require(s.width, "potential.width")?,
        )
        .map_err(invalid)?,
        "poschl_teller" => Potential::poschl_teller(
            require(s.amplitude, "potential.amplitude")?,
            s.center.unwrap_or(0.0),
            require(s.width, "potential.width")?,
        )
        .map_err(invalid)?,
        "table" => {
            let file = s.file.as_ref().ok_or_else(|| field_error("potential.file", "missing"))?;
            let path = if file.is_absolute() { file.clone() } else { base.join(file) };
            let (xs, vs) = read_table(&path)?;
            Potential::table(xs, vs).map_err(invalid)?
        }
        other => {
            return Err(field_error(
                "potential.kind",
                format!("unknown kind '{other}' (zero, square_well, gaussian, poschl_teller, table)"),
            ))
        }
    };
    Ok(match s.scale {
        Some(eps) => p.scaled(eps),
        None => p,
    })
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| field_error("potential.file", format!("{}: {e}", path.display())))?;
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| field_error("potential.file", e))?;
        let parse = |j: usize| -> Result<f64, ConfigError> {
            rec.get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| field_error("potential.file", format!("{} row {}: expected two numbers", path.display(), i + 1)))
        };
        xs.push(parse(0)?);
        vs.push(parse(1)?);
    }
    Ok((xs, vs))
}

fn matrix(m: &[[Complex; 2]; 2]) -> Mat2 {
    Mat2::new(m[0][0].value(), m[0][1].value(), m[1][0].value(), m[1][1].value())
}

fn build_boundary(s: &BoundarySection) -> Result<BoundaryCondition, ConfigError> {
    match s.preset.as_str() {
        "robin" => Ok(BoundaryCondition::robin(
            require(s.theta_right, "boundary.theta_right")?,
            require(s.theta_left, "boundary.theta_left")?,
        )),
        "explicit" => {
            let a = s.a.as_ref().ok_or_else(|| field_error("boundary.a", "missing"))?;
            let b = s.b.as_ref().ok_or_else(|| field_error("boundary.b", "missing"))?;
            BoundaryCondition::new(matrix(a), matrix(b)).map_err(|e| field_error("boundary", e))
        }
        name => BoundaryCondition::by_name(name).ok_or_else(|| {
            field_error("boundary.preset", format!("unknown preset '{name}' (dirichlet, neumann, periodic, robin, explicit)"))
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        RunConfig::from_raw(raw, Path::new("."))
    }

    #[test]
    fn defaults_are_valid() {
        let c = parse("").unwrap();
        assert!(c.potential.is_zero());
        assert_eq!(c.bc.name(), "dirichlet");
        assert_eq!(c.raw.converge.indices(), vec![10, 20, 30, 40, 50, 60, 70, 80]);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse("[physics]\nnu = -1.0\n").unwrap_err();
        assert!(e.0.starts_with("physics.nu"), "{e}");
        let e = parse("[potential]\nkind = \"square_well\"\nvalue = -2.0\nleft = -1.0\n").unwrap_err();
        assert!(e.0.starts_with("potential.right"), "{e}");
        let e = parse("[boundary]\npreset = \"mixed\"\n").unwrap_err();
        assert!(e.0.starts_with("boundary.preset"), "{e}");
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let e = parse("[physics]\nnu = 2.0\nmu = 1.0\n").unwrap_err();
        assert!(e.0.contains("line 3"), "{e}");
    }

    #[test]
    fn explicit_matrices_are_checked() {
        let ok = "[boundary]\npreset = \"explicit\"\na = [[1, 0], [0, 1]]\nb = [[0, 0], [0, 0]]\n";
        assert!(parse(ok).is_ok());
        let bad = "[boundary]\npreset = \"explicit\"\na = [[1, 0], [0, 1]]\nb = [[0, [0, 1]], [0, 0]]\n";
        assert!(parse(bad).unwrap_err().0.starts_with("boundary"));
    }
}
