use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SenseError};
use crate::signal::ValueCase;

use super::laws::ConvolutionForm;

/// Default number of grid points per table.
pub const DEFAULT_POINTS: usize = 4001;

/// Version tag written at the top of every cached table file.
pub const TABLE_FORMAT_VERSION: &str = "eigensense-table/1";

/// Which limiting law a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    /// `ḡ_{K,i}`: law of the `i`-th largest fluctuation coordinate.
    Marginal { k: usize, index: usize },
    /// Law of `lim √N(T_cnd − 1)` under S0.
    CndS0 { k: usize },
    /// MED under S1: `ḡ_{q1,1}`.
    S1Med { q1: usize },
    /// CND under S1: convolution of the top and bottom block marginals.
    S1Cnd { q1: usize, qr: usize, form: ConvolutionForm },
    /// Table built from raw samples.
    Empirical,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Marginal { k, index } => write!(f, "marginal-k{k}-i{index}"),
            Law::CndS0 { k } => write!(f, "cnd0-k{k}"),
            Law::S1Med { q1 } => write!(f, "s1med-q{q1}"),
            Law::S1Cnd { q1, qr, form } => write!(f, "s1cnd-q{q1}-r{qr}-{}", form.as_str()),
            Law::Empirical => f.write_str("empirical"),
        }
    }
}

impl FromStr for Law {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split('-').collect();
        let num = |p: &str, prefix: &str| -> std::result::Result<usize, String> {
            p.strip_prefix(prefix)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| format!("bad law component `{p}` in `{s}`"))
        };
        match parts.as_slice() {
            ["marginal", k, i] => Ok(Law::Marginal { k: num(k, "k")?, index: num(i, "i")? }),
            ["cnd0", k] => Ok(Law::CndS0 { k: num(k, "k")? }),
            ["s1med", q] => Ok(Law::S1Med { q1: num(q, "q")? }),
            ["s1cnd", q, r, form] => Ok(Law::S1Cnd {
                q1: num(q, "q")?,
                qr: num(r, "r")?,
                form: form.parse()?,
            }),
            ["empirical"] => Ok(Law::Empirical),
            _ => Err(format!("unknown law `{s}`")),
        }
    }
}

/// How a table's values were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMethod {
    ClosedForm,
    Quadrature,
    /// Empirical CDF of Wigner-ensemble draws.
    Sampled { draws: usize },
    Convolution,
    Empirical { samples: usize },
}

impl fmt::Display for TableMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableMethod::ClosedForm => f.write_str("closed-form"),
            TableMethod::Quadrature => f.write_str("quadrature"),
            TableMethod::Sampled { draws } => write!(f, "sampled:{draws}"),
            TableMethod::Convolution => f.write_str("convolution"),
            TableMethod::Empirical { samples } => write!(f, "empirical:{samples}"),
        }
    }
}

impl FromStr for TableMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let count = |v: &str| v.parse::<usize>().map_err(|e| format!("bad count in `{s}`: {e}"));
        match s.split_once(':') {
            None => match s {
                "closed-form" => Ok(TableMethod::ClosedForm),
                "quadrature" => Ok(TableMethod::Quadrature),
                "convolution" => Ok(TableMethod::Convolution),
                _ => Err(format!("unknown table method `{s}`")),
            },
            Some(("sampled", v)) => Ok(TableMethod::Sampled { draws: count(v)? }),
            Some(("empirical", v)) => Ok(TableMethod::Empirical { samples: count(v)? }),
            Some(_) => Err(format!("unknown table method `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableMeta {
    pub law: Law,
    pub case: ValueCase,
    pub method: TableMethod,
}

/// Uniform abscissae `lo = x_0 < … < x_{points−1} = hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        assert!(hi > lo && points >= 2, "degenerate grid [{lo}, {hi}] x {points}");
        Self { lo, hi, points }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn abscissae(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.hi } else { self.lo + h * i as f64 })
            .collect()
    }
}

/// A tabulated PDF/CDF pair, linearly interpolated between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    grid: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    meta: TableMeta,
}

fn cumulative_trapezoid(grid: &[f64], pdf: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 1..grid.len() {
        acc += 0.5 * (pdf[i] + pdf[i - 1]) * (grid[i] - grid[i - 1]);
        cdf.push(acc.min(1.0));
    }
    cdf
}

/// Share of a segment's mass below relative position `t` when the density
/// runs linearly from `p0` to `p1`.
fn segment_fraction(p0: f64, p1: f64, t: f64) -> f64 {
    let total = 0.5 * (p0 + p1);
    if total <= 0.0 {
        return t;
    }
    ((t * p0 + 0.5 * t * t * (p1 - p0)) / total).clamp(0.0, 1.0)
}

fn segment_fraction_inverse(p0: f64, p1: f64, u: f64) -> f64 {
    let total = 0.5 * (p0 + p1);
    if total <= 0.0 {
        return u;
    }
    let c = u * total;
    let root = (p0 * p0 + 2.0 * (p1 - p0) * c).max(0.0).sqrt();
    let denom = p0 + root;
    if denom <= 0.0 {
        return 0.0;
    }
    (2.0 * c / denom).clamp(0.0, 1.0)
}

impl DistributionTable {
    /// Builds a table from density values; the CDF is the cumulative
    /// trapezoidal integral, capped at 1.
    pub fn from_pdf(grid: Vec<f64>, pdf: Vec<f64>, meta: TableMeta) -> Result<Self> {
        let pdf: Vec<f64> = pdf.into_iter().map(|p| p.max(0.0)).collect();
        let cdf = cumulative_trapezoid(&grid, &pdf);
        Self::from_parts(grid, pdf, cdf, meta)
    }

    /// Builds a table from density and distribution values computed separately.
    pub fn from_parts(grid: Vec<f64>, pdf: Vec<f64>, cdf: Vec<f64>, meta: TableMeta) -> Result<Self> {
        if grid.len() < 2 || pdf.len() != grid.len() || cdf.len() != grid.len() {
            return Err(SenseError::arg("table columns must have equal length >= 2"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SenseError::arg("table grid must be strictly increasing"));
        }
        if pdf.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(SenseError::arg("table pdf must be finite and nonnegative"));
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || cdf.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(SenseError::arg("table cdf must be nondecreasing within [0, 1]"));
        }
        Ok(Self { grid, pdf, cdf, meta })
    }

    /// Empirical table: the CDF is the ECDF at each grid point and the density
    /// is its central difference quotient.
    pub fn from_samples(samples: &[f64], grid: GridSpec, law: Law, case: ValueCase, method: TableMethod) -> Result<Self> {
        if samples.is_empty() {
            return Err(SenseError::arg("cannot tabulate an empty sample"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let xs = grid.abscissae();
        let cdf: Vec<f64> = xs.iter().map(|&x| sorted.partition_point(|&s| s <= x) as f64 / n).collect();
        let last = xs.len() - 1;
        let pdf = (0..xs.len())
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(last));
                (cdf[b] - cdf[a]) / (xs[b] - xs[a])
            })
            .collect();
        Self::from_parts(xs, pdf, cdf, TableMeta { law, case, method })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn pdf_values(&self) -> &[f64] {
        &self.pdf
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn with_law(mut self, law: Law) -> Self {
        self.meta.law = law;
        self
    }

    pub fn lo(&self) -> f64 {
        self.grid[0]
    }

    pub fn hi(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Largest grid spacing.
    pub fn resolution(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    fn bracket(&self, x: f64) -> (usize, f64) {
        let i = self.grid.partition_point(|&g| g <= x).clamp(1, self.grid.len() - 1);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        (i, (x - x0) / (x1 - x0))
    }

    /// Interpolated density; zero outside the grid.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo() || x > self.hi() {
            return 0.0;
        }
        let (i, w) = self.bracket(x);
        self.pdf[i - 1] + w * (self.pdf[i] - self.pdf[i - 1])
    }

    /// CDF between grid points follows the integral of the interpolated
    /// density, rescaled to meet the tabulated values at both ends; 0 left of
    /// the grid and 1 right of it.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lo() {
            return 0.0;
        }
        if x >= self.hi() {
            return 1.0;
        }
        let (i, w) = self.bracket(x);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (c1 - c0) * segment_fraction(self.pdf[i - 1], self.pdf[i], w)
    }

    /// Inverse of [`Self::cdf`] (leftmost solution).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SenseError::arg(format!("quantile probability must lie in (0, 1), got {p}")));
        }
        let i = self.cdf.partition_point(|&c| c < p);
        if i == 0 {
            return Ok(self.grid[0]);
        }
        if i == self.cdf.len() {
            return Ok(self.hi());
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let u = (p - c0) / (c1 - c0);
        Ok(x0 + segment_fraction_inverse(self.pdf[i - 1], self.pdf[i], u) * (x1 - x0))
    }

    pub fn mean(&self) -> f64 {
        self.moment(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(|x| (x - m) * (x - m))
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .windows(2)
            .zip(self.pdf.windows(2))
            .map(|(g, p)| 0.5 * (f(g[0]) * p[0] + f(g[1]) * p[1]) * (g[1] - g[0]))
            .sum()
    }

    /// Largest gap between the stored CDF and the trapezoidal integral of the
    /// stored PDF.
    pub fn trapezoid_discrepancy(&self) -> f64 {
        cumulative_trapezoid(&self.grid, &self.pdf)
            .iter()
            .zip(&self.cdf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the table in the portable cache format.
    ///
    /// ```text
    /// eigensense-table/1
    /// law=marginal-k3-i1
    /// case=real
    /// method=quadrature
    /// points=4001
    /// x,pdf,cdf
    /// <x>,<pdf>,<cdf>        one row per grid point
    /// ```
    ///
    /// Values use the shortest decimal form that parses back to the same `f64`.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let io = |source| SenseError::Io { path: path.to_path_buf(), source };
        let mut out = String::with_capacity(self.grid.len() * 64);
        out.push_str(TABLE_FORMAT_VERSION);
        out.push('\n');
        out.push_str(&format!(
            "law={}\ncase={}\nmethod={}\npoints={}\nx,pdf,cdf\n",
            self.meta.law,
            self.meta.case.as_str(),
            self.meta.method,
            self.grid.len()
        ));
        for ((x, p), c) in self.grid.iter().zip(&self.pdf).zip(&self.cdf) {
            out.push_str(&format!("{x:?},{p:?},{c:?}\n"));
        }
        let mut file = fs::File::create(path).map_err(io)?;
        file.write_all(out.as_bytes()).map_err(io)
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| SenseError::Io { path: path.to_path_buf(), source })?;
        let bad = |reason: String| SenseError::Parse { path: path.to_path_buf(), reason };
        let mut lines = text.lines();
        match lines.next() {
            Some(TABLE_FORMAT_VERSION) => {}
            other => return Err(bad(format!("expected version tag {TABLE_FORMAT_VERSION}, found {other:?}"))),
        }
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` header")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected `{key}=...`, found `{line}`")))
        };
        let law: Law = header("law")?.parse().map_err(bad)?;
        let case: ValueCase = header("case")?.parse().map_err(|e: SenseError| bad(e.to_string()))?;
        let method: TableMethod = header("method")?.parse().map_err(bad)?;
        let points: usize = header("points")?.parse().map_err(|e| bad(format!("points: {e}")))?;
        if lines.next() != Some("x,pdf,cdf") {
            return Err(bad("missing column header".into()));
        }
        let (mut grid, mut pdf, mut cdf) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("row {n}: {e}")));
            if cols.len() != 3 {
                return Err(bad(format!("row {n}: expected 3 columns")));
            }
            grid.push(parse(cols[0])?);
            pdf.push(parse(cols[1])?);
            cdf.push(parse(cols[2])?);
        }
        if grid.len() != points {
            return Err(bad(format!("expected {points} rows, found {}", grid.len())));
        }
        Self::from_parts(grid, pdf, cdf, TableMeta { law, case, method }).map_err(|e| bad(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_table(sd: f64) -> DistributionTable {
        let g = GridSpec::new(-8.0 * sd, 8.0 * sd, 4001).abscissae();
        let pdf = g
            .iter()
            .map(|x| (-(x / sd).powi(2) / 2.0).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()))
            .collect();
        let meta = TableMeta { law: Law::Empirical, case: ValueCase::Real, method: TableMethod::ClosedForm };
        DistributionTable::from_pdf(g, pdf, meta).unwrap()
    }

    #[test]
    fn symmetric_median_and_bounds() {
        let t = gaussian_table(2f64.sqrt());
        assert!(t.quantile(0.5).unwrap().abs() <= t.resolution());
        assert!(t.quantile(0.0).is_err() && t.quantile(1.0).is_err() && t.quantile(f64::NAN).is_err());
        assert_eq!(t.cdf(-100.0), 0.0);
        assert_eq!(t.cdf(100.0), 1.0);
        assert_eq!(t.pdf(100.0), 0.0);
        assert!((t.variance() - 2.0).abs() < 1e-6);
        assert!((1.0 - t.cdf_values().last().unwrap()).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_columns() {
        let meta = TableMeta { law: Law::Empirical, case: ValueCase::Real, method: TableMethod::ClosedForm };
        assert!(DistributionTable::from_parts(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2], meta).is_err());
        assert!(DistributionTable::from_parts(vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0; 2], meta).is_err());
        assert!(DistributionTable::from_parts(vec![0.0, 1.0], vec![0.0; 2], vec![0.5, 0.4], meta).is_err());
    }

    #[test]
    fn law_labels_round_trip() {
        let laws = [
            Law::Marginal { k: 3, index: 2 },
            Law::CndS0 { k: 2 },
            Law::S1Med { q1: 1 },
            Law::S1Cnd { q1: 2, qr: 1, form: ConvolutionForm::Printed },
            Law::Empirical,
        ];
        for law in laws {
            assert_eq!(law.to_string().parse::<Law>().unwrap(), law);
        }
        assert!("marginal-k3".parse::<Law>().is_err());
        for m in [TableMethod::Sampled { draws: 10 }, TableMethod::Quadrature, TableMethod::Empirical { samples: 3 }] {
            assert_eq!(m.to_string().parse::<TableMethod>().unwrap(), m);
        }
    }

    #[test]
    fn cache_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.table");
        let t = gaussian_table(1.0);
        t.write_to(&path).unwrap();
        assert_eq!(DistributionTable::read_from(&path).unwrap(), t);

        let text = fs::read_to_string(&path).unwrap().replacen(TABLE_FORMAT_VERSION, "eigensense-table/0", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(DistributionTable::read_from(&path), Err(SenseError::Parse { .. })));
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(x in -5.0f64..5.0) {
            let t = gaussian_table(1.3);
            let back = t.quantile(t.cdf(x)).unwrap();
            prop_assert!((back - x).abs() <= t.resolution());
        }

        #[test]
        fn cdf_is_monotone(a in -12.0f64..12.0, b in -12.0f64..12.0) {
            let t = gaussian_table(1.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(t.cdf(lo) <= t.cdf(hi));
        }
    }
}
