//! Translation-invariant chain models and their Hamiltonians.
//!
//! A term is an operator on a short window, repeated at every site of the
//! ring. Two-site Pauli strings may instead couple sites `i` and `i + r` for
//! every distance `r` allowed by a decay law. Identical instances (which
//! happen on short rings, e.g. the bonds `(0,1)` and `(1,0)` of ZZ when
//! `L = 2`) are counted once.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{arr2, Array2};

use super::linalg::CMat;
use super::space::Space;
use super::SimError;
use crate::schema::{self, Issues};
use crate::C64;

/// Couplings below this magnitude are dropped from long-range sums.
pub const TRUNCATION: f64 = 1e-12;

/// Hermiticity tolerance on the assembled matrix (max-element norm).
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn pauli(c: char) -> Option<CMat> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let m = match c.to_ascii_uppercase() {
        'I' => arr2(&[[one, z], [z, one]]),
        'X' => arr2(&[[z, one], [one, z]]),
        'Y' => arr2(&[[z, -i], [i, z]]),
        'Z' => arr2(&[[one, z], [z, -one]]),
        _ => return None,
    };
    Some(CMat::from_complex(&m))
}

/// Tensor product of single-site Paulis, first letter most significant.
pub fn pauli_string(ops: &str) -> Result<CMat, SimError> {
    if ops.is_empty() {
        return Err(SimError::InvalidOperator("empty Pauli string".into()));
    }
    ops.chars().try_fold(CMat::identity(1), |acc, c| {
        pauli(c)
            .map(|p| acc.kron(&p))
            .ok_or_else(|| SimError::InvalidOperator(format!("unknown Pauli letter {c:?} in {ops:?}")))
    })
}

/// How a two-site coupling depends on the distance `r` between its sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// Equal amplitude for every `1 <= r <= range`.
    Finite(usize),
    /// `J e^{-mu (r - 1)}`.
    Exponential(f64),
    /// `J / r^a`.
    Power(f64),
}

impl Default for Decay {
    fn default() -> Self {
        Decay::Finite(1)
    }
}

impl fmt::Display for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decay::Finite(r) => write!(f, "finite:{r}"),
            Decay::Exponential(mu) => write!(f, "exp:{mu}"),
            Decay::Power(a) => write!(f, "pow:{a}"),
        }
    }
}

impl FromStr for Decay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (law, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("decay {s:?} must look like finite:r, exp:mu or pow:a"))?;
        match law.trim() {
            "finite" => match arg.trim().parse::<usize>() {
                Ok(r) if r >= 1 => Ok(Decay::Finite(r)),
                _ => Err(format!("finite range in {s:?} must be a positive integer")),
            },
            "exp" | "pow" => {
                let v: f64 = arg.trim().parse().map_err(|_| format!("rate in {s:?} is not a number"))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(format!("rate in {s:?} must be positive"));
                }
                Ok(if law.trim() == "exp" { Decay::Exponential(v) } else { Decay::Power(v) })
            }
            other => Err(format!("unknown decay law {other:?} (expected finite, exp or pow)")),
        }
    }
}

impl Decay {
    fn amplitude(&self, coupling: f64, r: usize) -> f64 {
        match *self {
            Decay::Finite(range) => {
                if r <= range {
                    coupling
                } else {
                    0.0
                }
            }
            Decay::Exponential(mu) => coupling * (-mu * (r as f64 - 1.0)).exp(),
            Decay::Power(a) => coupling / (r as f64).powf(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermOps {
    /// Pauli letters on consecutive sites (spin-1/2 only).
    Pauli(String),
    /// An arbitrary operator on `width` consecutive sites.
    Matrix(CMat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub ops: TermOps,
    pub coupling: f64,
    pub decay: Decay,
}

impl Term {
    pub fn pauli(ops: &str, coupling: f64) -> Self {
        Term { ops: TermOps::Pauli(ops.to_string()), coupling, decay: Decay::default() }
    }

    pub fn with_decay(mut self, decay: Decay) -> Self {
        self.decay = decay;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub l: usize,
    pub d: usize,
    pub terms: Vec<Term>,
    pub beta: f64,
}

/// One placed copy of a term, with sites sorted ascending.
#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub sites: Vec<usize>,
    pub matrix: CMat,
}

impl ChainModel {
    /// `H = -J sum_i Z_i Z_{i+1} - h sum_i X_i`.
    pub fn tfim(l: usize, j: f64, h: f64, beta: f64) -> Self {
        ChainModel { l, d: 2, terms: vec![Term::pauli("ZZ", -j), Term::pauli("X", -h)], beta }
    }

    pub fn space(&self) -> Result<Space, SimError> {
        Space::new(self.l, self.d)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let space = self.space()?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(SimError::InvalidModel(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        for (i, t) in self.terms.iter().enumerate() {
            self.term_radius(i, t, &space)?;
        }
        Ok(())
    }

    fn term_width(&self, index: usize, term: &Term) -> Result<usize, SimError> {
        let bad = |msg: String| SimError::InvalidModel(format!("term {}: {msg}", index + 1));
        if !term.coupling.is_finite() {
            return Err(bad("coupling must be finite".into()));
        }
        match &term.ops {
            TermOps::Pauli(s) => {
                if self.d != 2 {
                    return Err(bad(format!("Pauli strings need d = 2, model has d = {}", self.d)));
                }
                pauli_string(s).map_err(|e| bad(e.to_string()))?;
                Ok(s.chars().count())
            }
            TermOps::Matrix(m) => {
                let mut width = 0;
                let mut size = 1;
                while size < m.rows() {
                    size *= self.d;
                    width += 1;
                }
                if size != m.rows() || m.rows() != m.cols() || width == 0 {
                    return Err(bad(format!(
                        "matrix of shape {}x{} is not an operator on whole sites of dimension {}",
                        m.rows(),
                        m.cols(),
                        self.d
                    )));
                }
                let defect = m.hermiticity_defect();
                if defect > HERMITIAN_TOL {
                    return Err(SimError::NonHermitian { defect });
                }
                Ok(width)
            }
        }
    }

    /// Largest coupling distance kept for a term.
    fn term_radius(&self, index: usize, term: &Term, space: &Space) -> Result<usize, SimError> {
        let width = self.term_width(index, term)?;
        let bad = |msg: String| SimError::InvalidModel(format!("term {}: {msg}", index + 1));
        if width > space.sites() {
            return Err(bad(format!("window of {width} sites does not fit in L = {}", space.sites())));
        }
        let half = space.sites() / 2;
        let two_site_pauli = matches!(term.ops, TermOps::Pauli(_)) && width == 2;
        match term.decay {
            Decay::Finite(1) => Ok(width.saturating_sub(1)),
            _ if !two_site_pauli => Err(bad(format!(
                "decay {} applies only to two-site Pauli strings",
                term.decay
            ))),
            Decay::Finite(r) if r > half => Err(bad(format!(
                "range {r} exceeds half the chain ({half}); couplings would wrap around"
            ))),
            Decay::Finite(r) => Ok(r),
            _ => Ok((1..=half)
                .take_while(|&r| term.decay.amplitude(term.coupling, r).abs() >= TRUNCATION)
                .last()
                .unwrap_or(0)),
        }
    }

    /// Coupling distance kept for each term after truncation.
    pub fn truncation_radii(&self) -> Result<Vec<usize>, SimError> {
        let space = self.space()?;
        self.terms.iter().enumerate().map(|(i, t)| self.term_radius(i, t, &space)).collect()
    }

    pub(crate) fn instances(&self) -> Result<Vec<Instance>, SimError> {
        self.validate()?;
        let space = self.space()?;
        let l = self.l;
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut push = |sites: Vec<usize>, local: CMat| {
            let (sites, matrix) = canonical_order(&sites, &local, self.d);
            let key = instance_key(&sites, &matrix);
            if seen.insert(key) {
                out.push(Instance { sites, matrix });
            }
        };
        for (index, term) in self.terms.iter().enumerate() {
            let radius = self.term_radius(index, term, &space)?;
            match &term.ops {
                TermOps::Pauli(s) if s.chars().count() == 2 => {
                    let mut letters = s.chars();
                    let a = pauli(letters.next().expect("two letters")).expect("validated");
                    let b = pauli(letters.next().expect("two letters")).expect("validated");
                    for r in 1..=radius {
                        let amp = term.decay.amplitude(term.coupling, r);
                        if amp == 0.0 {
                            continue;
                        }
                        let mut m = a.kron(&b);
                        m.scale(amp);
                        for i in 0..l {
                            push(vec![i, (i + r) % l], m.clone());
                        }
                    }
                }
                TermOps::Pauli(s) => {
                    let mut m = pauli_string(s)?;
                    m.scale(term.coupling);
                    let w = s.chars().count();
                    for i in 0..l {
                        push((0..w).map(|k| (i + k) % l).collect(), m.clone());
                    }
                }
                TermOps::Matrix(m) => {
                    let mut m = m.clone();
                    m.scale(term.coupling);
                    let w = self.term_width(index, term)?;
                    for i in 0..l {
                        push((0..w).map(|k| (i + k) % l).collect(), m.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Reads a model file (TOML with keys `L`, `d`, `beta`, `terms`).
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| SimError::Parse(vec![e.to_string()]))?;
        let mut issues = Issues::new();
        let model = Self::from_table(&table, "", &mut issues);
        match model {
            Some(m) if issues.is_empty() => {
                m.validate()?;
                Ok(m)
            }
            _ => Err(SimError::Parse(issues.into_vec())),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Parse(vec![format!("cannot read model file {}: {e}", path.display())]))?;
        Self::from_toml_str(&text)
    }

    pub(crate) fn from_table(table: &toml::Table, path: &str, issues: &mut Issues) -> Option<Self> {
        schema::reject_unknown(table, &["L", "d", "beta", "terms"], path, issues);
        let l = schema::req_usize(table, "L", path, issues);
        let d = schema::opt_usize(table, "d", path, issues).unwrap_or(2);
        let beta = schema::opt_f64(table, "beta", path, issues).unwrap_or(0.2);
        let mut terms = Vec::new();
        let key = if path.is_empty() { "terms".to_string() } else { format!("{path}.terms") };
        match table.get("terms") {
            None => issues.push(format!("missing required key `{key}`")),
            Some(toml::Value::Array(arr)) => {
                for (i, v) in arr.iter().enumerate() {
                    let p = format!("{key}[{i}]");
                    match v {
                        toml::Value::Table(t) => {
                            if let Some(term) = parse_term(t, &p, issues) {
                                terms.push(term);
                            }
                        }
                        _ => issues.push(format!("`{p}` must be a table")),
                    }
                }
            }
            Some(_) => issues.push(format!("`{key}` must be an array of tables")),
        }
        Some(ChainModel { l: l?, d, terms, beta })
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = format!("L = {}\nd = {}\nbeta = {:?}\n", self.l, self.d, self.beta);
        for t in &self.terms {
            out.push_str("\n[[terms]]\n");
            match &t.ops {
                TermOps::Pauli(s) => out.push_str(&format!("ops = {s:?}\n")),
                TermOps::Matrix(m) => {
                    out.push_str(&format!("matrix_re = {}\n", rows_literal(m.re())));
                    if let Some(im) = m.im() {
                        out.push_str(&format!("matrix_im = {}\n", rows_literal(im)));
                    }
                }
            }
            out.push_str(&format!("J = {:?}\ndecay = \"{}\"\n", t.coupling, t.decay));
        }
        out
    }
}

fn rows_literal(m: &Array2<f64>) -> String {
    let rows: Vec<String> = m
        .rows()
        .into_iter()
        .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

fn parse_matrix(v: &toml::Value, path: &str, issues: &mut Issues) -> Option<Array2<f64>> {
    let rows = match v {
        toml::Value::Array(rows) if !rows.is_empty() => rows,
        _ => {
            issues.push(format!("`{path}` must be a non-empty array of rows"));
            return None;
        }
    };
    let mut data = Vec::new();
    let mut width = None;
    for (i, row) in rows.iter().enumerate() {
        let toml::Value::Array(cells) = row else {
            issues.push(format!("`{path}[{i}]` must be an array"));
            return None;
        };
        if *width.get_or_insert(cells.len()) != cells.len() {
            issues.push(format!("`{path}` rows have different lengths"));
            return None;
        }
        for c in cells {
            match schema::f64_of(c) {
                Some(x) => data.push(x),
                None => {
                    issues.push(format!("`{path}[{i}]` holds a non-number"));
                    return None;
                }
            }
        }
    }
    Array2::from_shape_vec((rows.len(), width.unwrap_or(0)), data).ok()
}

fn parse_term(t: &toml::Table, path: &str, issues: &mut Issues) -> Option<Term> {
    schema::reject_unknown(t, &["ops", "J", "decay", "matrix_re", "matrix_im"], path, issues);
    let coupling = schema::req_f64(t, "J", path, issues);
    let decay = match schema::opt_str(t, "decay", path, issues) {
        None => Some(Decay::default()),
        Some(s) => match s.parse::<Decay>() {
            Ok(d) => Some(d),
            Err(e) => {
                issues.push(format!("`{path}.decay`: {e}"));
                None
            }
        },
    };
    let ops = match (t.get("ops"), t.get("matrix_re")) {
        (Some(_), Some(_)) => {
            issues.push(format!("`{path}` sets both `ops` and `matrix_re`"));
            None
        }
        (None, None) => {
            issues.push(format!("`{path}` needs `ops` (Pauli string) or `matrix_re`"));
            None
        }
        (Some(_), None) => schema::opt_str(t, "ops", path, issues).map(|s| TermOps::Pauli(s.to_string())),
        (None, Some(re)) => {
            let re = parse_matrix(re, &format!("{path}.matrix_re"), issues);
            let im = t.get("matrix_im").map(|v| parse_matrix(v, &format!("{path}.matrix_im"), issues));
            match (re, im) {
                (Some(re), None) => Some(TermOps::Matrix(CMat::from_real(re))),
                (Some(re), Some(Some(im))) if im.dim() == re.dim() => {
                    Some(TermOps::Matrix(CMat::from_parts(re, Some(im))))
                }
                (Some(_), Some(Some(_))) => {
                    issues.push(format!("`{path}.matrix_im` shape differs from `matrix_re`"));
                    None
                }
                _ => None,
            }
        }
    };
    Some(Term { ops: ops?, coupling: coupling?, decay: decay? })
}

/// Reorders tensor factors so that `sites` are ascending.
pub(crate) fn canonical_order(sites: &[usize], m: &CMat, d: usize) -> (Vec<usize>, CMat) {
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by_key(|&k| sites[k]);
    if order.iter().enumerate().all(|(i, &k)| i == k) {
        return (sites.to_vec(), m.clone());
    }
    let sorted: Vec<usize> = order.iter().map(|&k| sites[k]).collect();
    (sorted, permute_factors(m, &order, d))
}

/// Matrix of the same operator with factor `order[i]` moved to position `i`.
pub(crate) fn permute_factors(m: &CMat, order: &[usize], d: usize) -> CMat {
    let k = order.len();
    let map = |idx: usize| {
        // digits of idx in the new order -> index in the old order
        let mut old = vec![0usize; k];
        let mut rest = idx;
        for pos in (0..k).rev() {
            old[order[pos]] = rest % d;
            rest /= d;
        }
        old.iter().fold(0, |acc, &v| acc * d + v)
    };
    CMat::from_fn(m.rows(), m.cols(), |i, j| m.get(map(i), map(j)))
}

fn instance_key(sites: &[usize], m: &CMat) -> (Vec<usize>, Vec<u64>) {
    let mut bits: Vec<u64> = m.re().iter().map(|v| v.to_bits()).collect();
    if let Some(im) = m.im() {
        bits.extend(im.iter().map(|v| v.to_bits()));
    }
    (sites.to_vec(), bits)
}

/// Assembled Hamiltonian of a chain model.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    space: Space,
    matrix: CMat,
    radii: Vec<usize>,
    translation_invariant: bool,
}

impl Hamiltonian {
    /// Wraps an explicit Hermitian matrix on `space`.
    pub fn from_matrix(space: Space, matrix: CMat) -> Result<Self, SimError> {
        if matrix.rows() != space.dim() || matrix.cols() != space.dim() {
            return Err(SimError::DimensionMismatch { expected: space.dim(), found: matrix.rows() });
        }
        let defect = matrix.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(SimError::NonHermitian { defect });
        }
        let shifted = space.permute_full(&matrix, &space.translation_map(1));
        let translation_invariant = shifted.max_abs_diff(&matrix) <= 1e-12 * matrix.max_abs().max(1.0);
        Ok(Hamiltonian { space, matrix, radii: Vec::new(), translation_invariant })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// Truncation radius recorded for each model term.
    pub fn radii(&self) -> &[usize] {
        &self.radii
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.translation_invariant
    }
}

/// Sums every term instance into a dense Hermitian matrix.
pub fn build_hamiltonian(model: &ChainModel) -> Result<Hamiltonian, SimError> {
    let space = model.space()?;
    let radii = model.truncation_radii()?;
    let instances = model.instances()?;
    let dim = space.dim();
    let complex = instances.iter().any(|i| !i.matrix.is_real());
    let mut re = Array2::<f64>::zeros((dim, dim));
    let mut im = complex.then(|| Array2::<f64>::zeros((dim, dim)));
    for inst in &instances {
        let k = inst.matrix.rows();
        for b in 0..dim {
            let col = space.local_index(b, &inst.sites);
            for r in 0..k {
                let a = inst.matrix.get(r, col);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let target = space.with_local(b, &inst.sites, r);
                re[[target, b]] += a.re;
                if let Some(m) = im.as_mut() {
                    m[[target, b]] += a.im;
                }
            }
        }
    }
    let matrix = CMat::from_parts(re, im);
    let defect = matrix.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(SimError::NonHermitian { defect });
    }
    Ok(Hamiltonian { space, matrix, radii, translation_invariant: true })
}
