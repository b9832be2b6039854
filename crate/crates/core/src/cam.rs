//! Grad-CAM, Hessian-CAM and higher-order Taylor-CAM saliences over grids
//! of feature vectors.
//!
//! Every salience is a mixed directional derivative of `F` at the flattened
//! grid. The importance direction of vector `i` carries `x_i` in block `i`
//! (local) or in every block (global); each further vector `j` contributes
//! the all-ones direction of block `j`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{CrossDual, ScalarFn, MAX_TAGS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    /// One feature vector per row.
    pub x: Array2<f64>,
    pub layout: Option<(usize, usize)>,
}

impl FeatureGrid {
    pub fn new(x: Array2<f64>) -> Result<Self> {
        if x.nrows() < 2 || x.ncols() < 1 {
            return Err(Error::Shape(format!(
                "grid needs at least 2 vectors of dimension 1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("grid has non-finite entries".into()));
        }
        Ok(FeatureGrid { x, layout: None })
    }

    pub fn with_layout(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.n() {
            return Err(Error::Shape(format!(
                "layout {rows}x{cols} does not hold {} vectors",
                self.n()
            )));
        }
        self.layout = Some((rows, cols));
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.x.iter().copied().collect()
    }

    /// Headerless CSV with one vector per line.
    pub fn parse_csv(text: &str) -> std::result::Result<FeatureGrid, String> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let row = rec
                .iter()
                .map(|v| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(format!("ragged row {}", rows.len() + 1));
                }
            }
            rows.push(row);
        }
        let d = rows.first().map_or(0, Vec::len);
        let x = Array2::from_shape_vec((rows.len(), d), rows.concat()).map_err(|e| e.to_string())?;
        FeatureGrid::new(x).map_err(|e| e.to_string())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureGrid> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureGrid::parse_csv(&text).map_err(|m| Error::parse(path, m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CamOptions {
    pub local_k: bool,
    pub square: bool,
    pub symmetrize: bool,
    pub zero_diagonal: bool,
    /// Sum mutual entries before squaring instead of after.
    pub symmetrize_before_square: bool,
    /// Clamp first-order importances at zero as classic Grad-CAM does.
    pub rectify: bool,
}

impl Default for CamOptions {
    fn default() -> Self {
        CamOptions {
            local_k: true,
            square: true,
            symmetrize: true,
            zero_diagonal: true,
            symmetrize_before_square: false,
            rectify: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SalienceTensor {
    pub order: usize,
    pub n: usize,
    /// Row-major over `order` indices in `0..n`.
    pub values: Vec<f64>,
    pub symmetrized: bool,
    pub diagonal_zeroed: bool,
}

impl SalienceTensor {
    fn zeros(order: usize, n: usize) -> Self {
        SalienceTensor {
            order,
            n,
            values: vec![0.0; n.pow(order as u32)],
            symmetrized: false,
            diagonal_zeroed: false,
        }
    }

    pub fn offset(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, tuple: &[usize]) -> f64 {
        self.values[self.offset(tuple)]
    }

    fn tuple_of(&self, mut offset: usize) -> Vec<usize> {
        let mut t = vec![0; self.order];
        for slot in t.iter_mut().rev() {
            *slot = offset % self.n;
            offset /= self.n;
        }
        t
    }

    /// The order-2 tensor as an `n × n` matrix.
    pub fn matrix(&self) -> Option<Array2<f64>> {
        (self.order == 2).then(|| Array2::from_shape_vec((self.n, self.n), self.values.clone()).unwrap())
    }

    /// Adds the entries of every permutation of a distinct index set into
    /// its representative cell: both cells for order two, the sorted tuple
    /// above that. Applying it to a symmetrized tensor changes nothing.
    pub fn symmetrize(&mut self) {
        if self.symmetrized || self.order < 2 {
            self.symmetrized = true;
            return;
        }
        let mut out = vec![0.0; self.values.len()];
        for (off, &v) in self.values.iter().enumerate() {
            let t = self.tuple_of(off);
            if has_repeat(&t) {
                out[off] += v;
                continue;
            }
            let mut sorted = t.clone();
            sorted.sort_unstable();
            out[self.offset(&sorted)] += v;
        }
        if self.order == 2 {
            for i in 0..self.n {
                for j in i + 1..self.n {
                    out[j * self.n + i] = out[i * self.n + j];
                }
            }
        }
        self.values = out;
        self.symmetrized = true;
    }

    /// Zeroes every entry whose tuple repeats an index.
    pub fn zero_diagonal(&mut self) {
        for off in 0..self.values.len() {
            if has_repeat(&self.tuple_of(off)) {
                self.values[off] = 0.0;
            }
        }
        self.diagonal_zeroed = true;
    }
}

fn has_repeat(t: &[usize]) -> bool {
    t.iter().enumerate().any(|(a, x)| t[a + 1..].contains(x))
}

fn check_grid<F: ScalarFn>(f: &F, x: &FeatureGrid) -> Result<()> {
    if f.input_dim() != x.n() * x.d() {
        return Err(Error::Shape(format!(
            "function takes {} inputs, grid flattens to {}",
            f.input_dim(),
            x.n() * x.d()
        )));
    }
    Ok(())
}

fn importance_direction(x: &FeatureGrid, i: usize, local_k: bool) -> Vec<f64> {
    let (n, d) = (x.n(), x.d());
    let mut u = vec![0.0; n * d];
    for k in 0..n {
        if local_k && k != i {
            continue;
        }
        for p in 0..d {
            u[k * d + p] = x.x[[i, p]];
        }
    }
    u
}

fn block_direction(x: &FeatureGrid, j: usize) -> Vec<f64> {
    let d = x.d();
    let mut v = vec![0.0; x.n() * d];
    v[j * d..(j + 1) * d].fill(1.0);
    v
}

/// Mixed directional derivative for one index tuple, before squaring.
fn tuple_derivative<F: ScalarFn>(f: &F, x: &FeatureGrid, tuple: &[usize], local_k: bool) -> Result<f64> {
    if tuple.len() > MAX_TAGS {
        return Err(Error::Capacity {
            requested: tuple.len(),
            capacity: MAX_TAGS,
        });
    }
    if let Some(&bad) = tuple.iter().find(|&&i| i >= x.n()) {
        return Err(Error::Index {
            index: bad,
            len: x.n(),
        });
    }
    let mut dirs = vec![importance_direction(x, tuple[0], local_k)];
    dirs.extend(tuple[1..].iter().map(|&j| block_direction(x, j)));
    let seeded = CrossDual::seed_directions(&x.flat(), &dirs)?;
    Ok(f.eval(&seeded)?.top())
}

/// Importance of vector `i`: `Σ_p x_ip Σ_k ∂F/∂x_kp`, or with `local_k`
/// only `k = i`.
pub fn grad_cam<F: ScalarFn>(f: &F, x: &FeatureGrid, i: usize, opts: &CamOptions) -> Result<f64> {
    check_grid(f, x)?;
    let v = tuple_derivative(f, x, &[i], opts.local_k)?;
    Ok(if opts.rectify { v.max(0.0) } else { v })
}

fn finish(mut s: SalienceTensor, opts: &CamOptions) -> SalienceTensor {
    if opts.square && !opts.symmetrize_before_square {
        s.values.iter_mut().for_each(|v| *v *= *v);
    }
    if opts.symmetrize {
        s.symmetrize();
    }
    if opts.square && opts.symmetrize_before_square {
        s.values.iter_mut().for_each(|v| *v *= *v);
    }
    if opts.zero_diagonal {
        s.zero_diagonal();
    }
    s
}

/// Pairwise interaction salience: how vector `j` moves the importance of
/// vector `i`, squared and symmetrized per `opts`.
pub fn hessian_cam<F: ScalarFn>(f: &F, x: &FeatureGrid, opts: &CamOptions) -> Result<SalienceTensor> {
    check_grid(f, x)?;
    let n = x.n();
    let mut s = SalienceTensor::zeros(2, n);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| !(opts.zero_diagonal && i == j))
        .collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| tuple_derivative(f, x, &[i, j], opts.local_k))
        .collect::<Result<_>>()?;
    for ((i, j), v) in pairs.into_iter().zip(vals) {
        s.values[i * n + j] = v;
    }
    Ok(finish(s, opts))
}

/// Order-`order` salience tensor. Order one gives the Grad-CAM importances,
/// order two the Hessian-CAM matrix.
pub fn taylor_cam<F: ScalarFn>(f: &F, x: &FeatureGrid, order: usize, opts: &CamOptions) -> Result<SalienceTensor> {
    check_grid(f, x)?;
    if order == 0 {
        return Err(Error::Config("salience order must be at least 1".into()));
    }
    if order > MAX_TAGS {
        return Err(Error::Capacity {
            requested: order,
            capacity: MAX_TAGS,
        });
    }
    let n = x.n();
    let mut s = SalienceTensor::zeros(order, n);
    if order == 1 {
        for i in 0..n {
            s.values[i] = grad_cam(f, x, i, opts)?;
        }
        return Ok(s);
    }
    let tuples: Vec<Vec<usize>> = (0..s.values.len())
        .map(|off| s.tuple_of(off))
        .filter(|t| !(opts.zero_diagonal && has_repeat(t)))
        .collect();
    let vals: Vec<f64> = tuples
        .par_iter()
        .map(|t| tuple_derivative(f, x, t, opts.local_k))
        .collect::<Result<_>>()?;
    for (t, v) in tuples.iter().zip(vals) {
        let off = s.offset(t);
        s.values[off] = v;
    }
    Ok(finish(s, opts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedTuple {
    pub set: Vec<usize>,
    pub salience: f64,
}

/// Every set of distinct indices once, strongest first with lexicographic
/// ties. An unsymmetrized tensor scores a set by the sum over its
/// permutations.
pub fn ranked_sets(s: &SalienceTensor) -> Vec<RankedTuple> {
    let all: Vec<usize> = (0..s.n).collect();
    let mut out: Vec<RankedTuple> = crate::synth::combinations(&all, s.order)
        .into_iter()
        .map(|set| {
            let salience = if s.symmetrized || s.order == 1 {
                s.get(&set)
            } else {
                permutations(&set).iter().map(|t| s.get(t)).sum()
            };
            RankedTuple { set, salience }
        })
        .collect();
    out.sort_by(|a, b| b.salience.total_cmp(&a.salience));
    out
}

fn permutations(set: &[usize]) -> Vec<Vec<usize>> {
    if set.len() <= 1 {
        return vec![set.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in set.iter().enumerate() {
        let mut rest = set.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Leading `k` index sets (all of them if fewer exist).
pub fn top_interactions(s: &SalienceTensor, k: usize) -> Vec<RankedTuple> {
    let mut r = ranked_sets(s);
    r.truncate(k);
    r
}

/// Index sets whose salience exceeds `threshold`.
pub fn interactions_above(s: &SalienceTensor, threshold: f64) -> Vec<RankedTuple> {
    ranked_sets(s).into_iter().filter(|t| t.salience > threshold).collect()
}

const CELL: f64 = 24.0;
const MARGIN: f64 = 10.0;

fn color(v: f64, max: f64) -> String {
    let t = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 - 40.0 * t).round() as u8;
    let g = (255.0 - 200.0 * t).round() as u8;
    let b = (255.0 - 215.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// SVG with the `n × n` heatmap and, when a layout is given, the top `k`
/// pairs with positive salience drawn as linked boxes on the grid.
pub fn heatmap_svg(s: &SalienceTensor, layout: Option<(usize, usize)>, k: usize) -> Result<String> {
    if s.order != 2 {
        return Err(Error::Config(format!("heatmaps need an order-2 tensor, got order {}", s.order)));
    }
    let n = s.n;
    if let Some((rows, cols)) = layout {
        if rows * cols != n {
            return Err(Error::Shape(format!("layout {rows}x{cols} does not hold {n} vectors")));
        }
    }
    let max = s.values.iter().copied().fold(0.0, f64::max);
    let heat_w = MARGIN * 2.0 + CELL * n as f64;
    let (grid_w, grid_h) = layout.map_or((0.0, 0.0), |(r, c)| (CELL * 2.0 * c as f64 + MARGIN, CELL * 2.0 * r as f64));
    let width = heat_w + grid_w;
    let height = MARGIN * 2.0 + (CELL * n as f64).max(grid_h);
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    svg.push_str("<g class=\"heatmap\">\n");
    for i in 0..n {
        for j in 0..n {
            let v = s.values[i * n + j];
            writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"><title>({i},{j}) {v:e}</title></rect>"#,
                MARGIN + CELL * j as f64,
                MARGIN + CELL * i as f64,
                color(v, max)
            )
            .unwrap();
        }
    }
    svg.push_str("</g>\n");
    if let Some((_, cols)) = layout {
        let x0 = heat_w + MARGIN;
        let center = |idx: usize| {
            let (r, c) = (idx / cols, idx % cols);
            (x0 + CELL * (2.0 * c as f64 + 1.0), MARGIN + CELL * (2.0 * r as f64 + 1.0))
        };
        svg.push_str("<g class=\"grid\">\n");
        for idx in 0..n {
            let (cx, cy) = center(idx);
            writeln!(
                svg,
                r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="none" stroke="#999999"/>"##,
                cx - CELL / 2.0,
                cy - CELL / 2.0
            )
            .unwrap();
        }
        svg.push_str("</g>\n");
        for t in top_interactions(s, k).into_iter().filter(|t| t.salience > 0.0) {
            let (a, b) = (center(t.set[0]), center(t.set[1]));
            writeln!(svg, r#"<g class="pair" data-set="{},{}">"#, t.set[0], t.set[1]).unwrap();
            for (cx, cy) in [a, b] {
                writeln!(
                    svg,
                    r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
                    cx - CELL / 2.0,
                    cy - CELL / 2.0
                )
                .unwrap();
            }
            writeln!(
                svg,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#d62728" stroke-width="2"/>"##,
                a.0, a.1, b.0, b.1
            )
            .unwrap();
            svg.push_str("</g>\n");
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_heatmap(s: &SalienceTensor, layout: Option<(usize, usize)>, k: usize, path: &Path) -> Result<()> {
    let svg = heatmap_svg(s, layout, k)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;
    use ndarray::array;

    /// `Σ_p x_{0p} x_{1p}` over the first two vectors.
    struct Bilinear {
        n: usize,
        d: usize,
    }

    impl ScalarFn for Bilinear {
        fn input_dim(&self) -> usize {
            self.n * self.d
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            let mut acc = x[0].lift(0.0);
            for p in 0..self.d {
                acc = acc + x[p].clone() * x[self.d + p].clone();
            }
            Ok(acc)
        }
    }

    struct Additive(usize);

    impl ScalarFn for Additive {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            let mut acc = x[0].lift(0.0);
            for v in x {
                acc = acc + v.sin()?;
            }
            Ok(acc)
        }
    }

    struct First;

    impl ScalarFn for First {
        fn input_dim(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            Ok(x[0].clone())
        }
    }

    struct Trilinear;

    impl ScalarFn for Trilinear {
        fn input_dim(&self) -> usize {
            3
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            Ok(x[0].clone() * x[1].clone() * x[2].clone())
        }
    }

    fn bilinear_grid() -> FeatureGrid {
        FeatureGrid::new(array![[1.0, 2.0, 3.0], [0.5, -1.0, 2.0]]).unwrap()
    }

    #[test]
    fn grad_cam_examples() {
        let f = Bilinear { n: 2, d: 3 };
        let g = bilinear_grid();
        let local = grad_cam(&f, &g, 0, &CamOptions::default()).unwrap();
        assert!((local - (0.5 - 2.0 + 6.0)).abs() < 1e-12);
        let global = CamOptions {
            local_k: false,
            ..CamOptions::default()
        };
        let g1 = FeatureGrid::new(array![[0.7], [-0.4]]).unwrap();
        assert!((grad_cam(&First, &g1, 1, &global).unwrap() + 0.4).abs() < 1e-15);
        assert_eq!(grad_cam(&First, &g1, 1, &CamOptions::default()).unwrap(), 0.0);
        assert!(matches!(grad_cam(&First, &g1, 2, &global), Err(Error::Index { .. })));
    }

    #[test]
    fn bilinear_hessian_cam() {
        let f = Bilinear { n: 2, d: 3 };
        let raw = CamOptions {
            symmetrize: false,
            ..CamOptions::default()
        };
        let s = hessian_cam(&f, &bilinear_grid(), &raw).unwrap();
        assert_eq!(s.get(&[0, 1]), 36.0);
        assert_eq!(s.get(&[1, 0]), 1.5 * 1.5);
        assert_eq!(s.get(&[0, 0]), 0.0);
        let top = top_interactions(&s, 1);
        assert_eq!(top[0].set, vec![0, 1]);
        let sym = hessian_cam(&f, &bilinear_grid(), &CamOptions::default()).unwrap();
        assert_eq!(sym.get(&[0, 1]), 38.25);
        assert_eq!(sym.get(&[1, 0]), 38.25);
    }

    #[test]
    fn additive_model_has_no_salience() {
        let g = FeatureGrid::new(array![[0.3, 0.1], [0.2, -0.9], [1.1, 0.4]]).unwrap();
        let s = hessian_cam(&Additive(6), &g, &CamOptions::default()).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(interactions_above(&s, 0.0).is_empty());
        assert_eq!(top_interactions(&s, 10).len(), 3);
    }

    #[test]
    fn trilinear_third_order() {
        let g = FeatureGrid::new(array![[0.6], [2.0], [-3.0]]).unwrap();
        let raw = CamOptions {
            symmetrize: false,
            ..CamOptions::default()
        };
        let s = taylor_cam(&Trilinear, &g, 3, &raw).unwrap();
        assert!((s.get(&[0, 1, 2]) - 0.36).abs() < 1e-15);
        assert_eq!(s.get(&[0, 0, 2]), 0.0);
        let sym = taylor_cam(&Trilinear, &g, 3, &CamOptions::default()).unwrap();
        let expected = 0.36 * 2.0 + 4.0 * 2.0 + 9.0 * 2.0;
        assert!((sym.get(&[0, 1, 2]) - expected).abs() < 1e-12);
        assert_eq!(sym.get(&[2, 1, 0]), 0.0);
        assert_eq!(top_interactions(&sym, 5).len(), 1);
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let g = FeatureGrid::new(array![[0.3, 0.1], [0.2, -0.9], [1.1, 0.4]]).unwrap();
        let f = Bilinear { n: 3, d: 2 };
        let mut s = hessian_cam(
            &f,
            &g,
            &CamOptions {
                symmetrize: false,
                ..CamOptions::default()
            },
        )
        .unwrap();
        s.symmetrize();
        let once = s.clone();
        s.symmetrize();
        assert_eq!(s, once);
        let m = once.matrix().unwrap();
        assert_eq!(m, m.t());
    }

    #[test]
    fn capacity_is_named() {
        let g = FeatureGrid::new(Array2::zeros((9, 1))).unwrap();
        struct Sum9;
        impl ScalarFn for Sum9 {
            fn input_dim(&self) -> usize {
                9
            }
            fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
                Ok(x[0].clone())
            }
        }
        let err = taylor_cam(&Sum9, &g, 9, &CamOptions::default()).unwrap_err();
        assert!(err.to_string().contains("capacity is 8"));
    }

    #[test]
    fn heatmap_rendering() {
        let mut s = SalienceTensor::zeros(2, 4);
        let blank = heatmap_svg(&s, Some((2, 2)), 4).unwrap();
        assert!(!blank.contains("class=\"pair\""));
        assert_eq!(blank.matches("fill=\"#ffffff\"").count(), 16);
        s.values[1] = 2.0;
        s.values[4] = 2.0;
        s.symmetrized = true;
        let one = heatmap_svg(&s, Some((2, 2)), 4).unwrap();
        assert_eq!(one.matches("class=\"pair\"").count(), 1);
        assert_eq!(one, heatmap_svg(&s, Some((2, 2)), 4).unwrap());
        assert!(heatmap_svg(&s, Some((3, 2)), 4).is_err());
    }

    #[test]
    fn grid_csv() {
        let g = FeatureGrid::parse_csv("1,2\n3,4\n5,6\n").unwrap();
        assert_eq!((g.n(), g.d()), (3, 2));
        assert!(FeatureGrid::parse_csv("1,2\n3\n").is_err());
        assert!(FeatureGrid::parse_csv("1,2\n").is_err());
    }
}
