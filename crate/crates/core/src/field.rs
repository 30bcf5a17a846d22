//! Surrogate ground-truth rate fields.
//!
//! A [`Grid`] stores one value per cell, located at the cell center:
//! node `(i, j)` sits at `(origin_x + (i + 0.5) * cell_size, origin_y + (j + 0.5) * cell_size)`.
//! Values are stored row-major with `j` (the y index) as the row.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kriging::{krige_grid, KrigingMethod};
use crate::sample::{merge_colocated, Sample};
use crate::variography::VariogramModel;

/// Tolerance used when deciding whether a query sits on the field boundary.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, nx: usize, ny: usize) -> Result<Self> {
        let spec = Self { origin_x, origin_y, cell_size, nx, ny };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid covering a `width` x `height` rectangle anchored at the origin.
    /// The extent is rounded up to a whole number of cells.
    pub fn covering(width: f64, height: f64, cell_size: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::InvalidSpec(format!("extent {width} x {height} must be positive")));
        }
        if !(cell_size > 0.0) {
            return Err(Error::InvalidSpec(format!("cell_size {cell_size} must be > 0")));
        }
        let nx = (width / cell_size - EDGE_EPS).ceil().max(1.0) as usize;
        let ny = (height / cell_size - EDGE_EPS).ceil().max(1.0) as usize;
        Self::new(0.0, 0.0, cell_size, nx, ny)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::InvalidSpec(format!("cell_size {} must be > 0", self.cell_size)));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidSpec(format!("nx = {}, ny = {} must both be >= 1", self.nx, self.ny)));
        }
        if !self.origin_x.is_finite() || !self.origin_y.is_finite() {
            return Err(Error::InvalidSpec("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.cell_size
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self) -> (f64, f64) {
        (self.origin_x + 0.5 * self.width(), self.origin_y + 0.5 * self.height())
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin_x + (i as f64 + 0.5) * self.cell_size,
            self.origin_y + (j as f64 + 0.5) * self.cell_size,
        )
    }

    /// Node coordinates in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| self.node(i, j)))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol = EDGE_EPS * self.cell_size.max(1.0);
        x >= self.origin_x - tol
            && x <= self.origin_x + self.width() + tol
            && y >= self.origin_y - tol
            && y <= self.origin_y + self.height() + tol
    }
}

/// Values attached to the nodes of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn filled(spec: GridSpec, value: f64) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, values: vec![value; spec.len()] })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation between the four nodes surrounding `(x, y)`.
    /// Between the outermost node row and the field boundary the edge value
    /// is held constant.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<f64> {
        if !self.spec.contains(x, y) || !x.is_finite() || !y.is_finite() {
            return Err(Error::OutOfBounds { x, y });
        }
        let s = &self.spec;
        let (i0, fx) = axis_cell((x - s.origin_x) / s.cell_size - 0.5, s.nx);
        let (j0, fy) = axis_cell((y - s.origin_y) / s.cell_size - 0.5, s.ny);
        let i1 = (i0 + 1).min(s.nx - 1);
        let j1 = (j0 + 1).min(s.ny - 1);
        let v00 = self.get(i0, j0);
        let v10 = self.get(i1, j0);
        let v01 = self.get(i0, j1);
        let v11 = self.get(i1, j1);
        let bottom = lerp(v00, v10, fx);
        let top = lerp(v01, v11, fx);
        Ok(lerp(bottom, top, fy))
    }
}

/// Exact at both ends.
fn lerp(a: f64, b: f64, f: f64) -> f64 {
    (1.0 - f) * a + f * b
}

/// Lower node index and fractional offset along one axis.
fn axis_cell(u: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let mut u = u.clamp(0.0, (n - 1) as f64);
    // snap coordinates that are a node up to rounding, so lookups there are exact
    if (u - u.round()).abs() < 1e-9 {
        u = u.round();
    }
    let i0 = (u.floor() as usize).min(n - 2);
    (i0, u - i0 as f64)
}

/// Dense grid of true count rates (counts/s) used as simulation ground truth.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Grid", into = "Grid")]
pub struct RateField {
    grid: Grid,
}

impl TryFrom<Grid> for RateField {
    type Error = Error;

    fn try_from(grid: Grid) -> Result<Self> {
        RateField::from_grid(grid)
    }
}

impl From<RateField> for Grid {
    fn from(field: RateField) -> Grid {
        field.grid
    }
}

impl RateField {
    pub fn from_grid(grid: Grid) -> Result<Self> {
        grid.spec.validate()?;
        if let Some((k, v)) = grid.values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::Validation(format!("rate {v} at cell {k} must be finite and >= 0")));
        }
        Ok(Self { grid })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.grid.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rates(&self) -> &[f64] {
        &self.grid.values
    }

    /// Rate at an arbitrary position inside the field (bilinear between nodes).
    pub fn rate_at(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.grid.interpolate(x, y)?.max(0.0))
    }
}

/// Two-valued field: cells whose center lies left of `border_x` are wet.
pub fn make_step_field(spec: GridSpec, border_x: f64, rate_wet: f64, rate_dry: f64) -> Result<RateField> {
    spec.validate()?;
    for (name, r) in [("rate_wet", rate_wet), ("rate_dry", rate_dry)] {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Validation(format!("{name} = {r} must be finite and >= 0")));
        }
    }
    if !(border_x >= spec.origin_x && border_x <= spec.origin_x + spec.width()) {
        return Err(Error::Validation(format!("border_x = {border_x} lies outside the field")));
    }
    let values = spec
        .nodes()
        .map(|(x, _)| if x < border_x { rate_wet } else { rate_dry })
        .collect();
    RateField::from_grid(Grid::new(spec, values)?)
}

/// One row of an observation CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    pub counts: u64,
}

impl ObservationRecord {
    pub fn rate(&self) -> f64 {
        self.counts as f64 / self.duration
    }
}

impl From<&ObservationRecord> for Sample {
    fn from(r: &ObservationRecord) -> Self {
        Sample::new(r.x, r.y, r.duration, r.counts as f64)
    }
}

/// Surrogate built by ordinary kriging, with the number of nodes whose
/// negative estimate was clamped to zero.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub field: RateField,
    pub clamped_nodes: usize,
}

/// Extrapolates observed rates over `spec` by ordinary kriging.
/// Co-located observations are merged first.
pub fn build_surrogate_from_observations(
    obs: &[ObservationRecord],
    spec: GridSpec,
    vg: &VariogramModel,
) -> Result<Surrogate> {
    spec.validate()?;
    let samples: Vec<Sample> = obs.iter().map(Sample::from).collect();
    let samples = merge_colocated(&samples);
    if samples.len() < 2 {
        return Err(Error::Empty(format!(
            "surrogate needs at least 2 distinct observation locations, got {}",
            samples.len()
        )));
    }
    let map = krige_grid(&samples, vg, 0.0, &spec, KrigingMethod::Ordinary)?;
    Ok(Surrogate {
        clamped_nodes: map.clamped_estimates,
        field: RateField::from_grid(map.estimate)?,
    })
}

/// Copies a single measured transect into `copies` parallel lines spaced
/// `spacing` meters apart along y.
pub fn replicate_transect(obs: &[ObservationRecord], copies: usize, spacing: f64) -> Vec<ObservationRecord> {
    (0..copies)
        .flat_map(|k| {
            obs.iter().map(move |o| ObservationRecord { y: o.y + k as f64 * spacing, ..*o })
        })
        .collect()
}

/// Reads an observation CSV with header `x,y,duration_s,counts`.
pub fn load_observations_csv(path: impl AsRef<Path>) -> Result<Vec<ObservationRecord>> {
    let file = std::fs::File::open(path)?;
    read_observations(file)
}

pub fn read_observations<R: std::io::Read>(reader: R) -> Result<Vec<ObservationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["x", "y", "duration_s", "counts"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `x,y,duration_s,counts`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<f64> {
            row[k].parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("column `{}`: {e}", expected[k]),
            })
        };
        let (x, y, duration, counts) = (field(0)?, field(1)?, field(2)?, field(3)?);
        if !(duration > 0.0) {
            return Err(Error::Validation(format!("line {line}: duration_s = {duration} must be > 0")));
        }
        if counts < 0.0 {
            return Err(Error::Validation(format!("line {line}: counts = {counts} must be >= 0")));
        }
        if counts.fract() != 0.0 || !counts.is_finite() {
            return Err(Error::Parse { line, message: format!("counts = {counts} is not an integer") });
        }
        out.push(ObservationRecord { x, y, duration, counts: counts as u64 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(nx: usize, ny: usize) -> GridSpec {
        GridSpec::new(0.0, 0.0, 1.0, nx, ny).unwrap()
    }

    #[test]
    fn step_field_sides() {
        let s = GridSpec::covering(60.0, 50.0, 5.0).unwrap();
        let f = make_step_field(s, 30.0, 2.5, 5.0).unwrap();
        assert_eq!(f.rate_at(50.0, 25.0).unwrap(), 5.0);
        assert_eq!(f.rate_at(10.0, 25.0).unwrap(), 2.5);
        let mut distinct: Vec<f64> = f.rates().to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert_eq!(distinct, vec![2.5, 5.0]);
    }

    #[test]
    fn step_field_uniform_and_mean() {
        let f = make_step_field(spec(4, 3), 2.0, 3.0, 3.0).unwrap();
        assert!(f.rates().iter().all(|&r| r == 3.0));
        let f = make_step_field(spec(4, 3), 2.0, 3.0, 4.0).unwrap();
        assert_eq!(f.grid().mean(), 3.5);
    }

    #[test]
    fn step_field_rejects_bad_input() {
        let bad = GridSpec { origin_x: 0.0, origin_y: 0.0, cell_size: 0.0, nx: 2, ny: 2 };
        assert!(matches!(make_step_field(bad, 0.5, 1.0, 2.0), Err(Error::InvalidSpec(_))));
        let bad = GridSpec { nx: 0, ..spec(2, 2) };
        assert!(matches!(make_step_field(bad, 0.5, 1.0, 2.0), Err(Error::InvalidSpec(_))));
        assert!(make_step_field(spec(2, 2), 0.5, -1.0, 2.0).is_err());
        assert!(make_step_field(spec(2, 2), 5.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn interpolation_at_nodes_and_midpoints() {
        let s = spec(2, 2);
        let f = RateField::from_grid(Grid::new(s, vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        assert_eq!(f.rate_at(0.5, 0.5).unwrap(), 1.0);
        assert_eq!(f.rate_at(1.5, 1.5).unwrap(), 4.0);
        assert_eq!(f.rate_at(1.0, 1.0).unwrap(), 2.5);

        let f = RateField::from_grid(Grid::new(spec(2, 1), vec![2.0, 4.0]).unwrap()).unwrap();
        assert_eq!(f.rate_at(1.0, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn out_of_bounds_query() {
        let f = make_step_field(spec(3, 3), 1.0, 1.0, 2.0).unwrap();
        assert!(matches!(f.rate_at(-0.1, 1.0), Err(Error::OutOfBounds { .. })));
        assert!(matches!(f.rate_at(1.0, 3.5), Err(Error::OutOfBounds { .. })));
        // the boundary itself is inside
        assert_eq!(f.rate_at(3.0, 3.0).unwrap(), 2.0);
        assert_eq!(f.rate_at(0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(RateField::from_grid(Grid::new(spec(1, 2), vec![1.0, -0.5]).unwrap()).is_err());
        assert!(RateField::from_grid(Grid::new(spec(1, 2), vec![1.0, f64::NAN]).unwrap()).is_err());
    }

    #[test]
    fn csv_parsing() {
        let text = "x,y,duration_s,counts\n10.0,20.0,600,1800\n0,0,300,0\n";
        let obs = read_observations(text.as_bytes()).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0], ObservationRecord { x: 10.0, y: 20.0, duration: 600.0, counts: 1800 });

        assert!(read_observations("x,y,duration_s,counts\n".as_bytes()).unwrap().is_empty());

        match read_observations("x,y,duration_s,counts\n1,2,3,4\n1,2,abc,4\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_observations("x,y,duration_s,counts\n1,2,-3,4\n".as_bytes()),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            read_observations("x,y,duration_s,counts\n1,2,3,-4\n".as_bytes()),
            Err(Error::Validation(_))
        ));
        assert!(matches!(read_observations("a,b\n1,2\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn seventy_two_rows() {
        let mut text = String::from("x,y,duration_s,counts\n");
        for k in 0..72 {
            text.push_str(&format!("{},{},600,{}\n", (k % 9) * 30, (k / 9) * 30, 2000 + k));
        }
        let obs = read_observations(text.as_bytes()).unwrap();
        assert_eq!(obs.len(), 72);
        assert_eq!(obs[71].counts, 2071);
    }

    #[test]
    fn transect_replication() {
        let line = [
            ObservationRecord { x: 0.0, y: 0.0, duration: 600.0, counts: 1500 },
            ObservationRecord { x: 30.0, y: 0.0, duration: 600.0, counts: 3000 },
        ];
        let rep = replicate_transect(&line, 6, 10.0);
        assert_eq!(rep.len(), 12);
        assert_eq!(rep[11].y, 50.0);
        assert_eq!(rep[11].counts, 3000);
    }

    #[test]
    fn surrogate_from_equal_rates_is_constant() {
        let obs = [
            ObservationRecord { x: 2.0, y: 3.0, duration: 100.0, counts: 300 },
            ObservationRecord { x: 8.0, y: 7.0, duration: 200.0, counts: 600 },
        ];
        let vg = VariogramModel::new(0.0, 5.0, 1.0).unwrap();
        let s = build_surrogate_from_observations(&obs, spec(10, 10), &vg).unwrap();
        for r in s.field.rates() {
            assert!((r - 3.0).abs() <= 1e-9 * 3.0, "{r}");
        }
    }

    #[test]
    fn surrogate_is_exact_at_nodes_with_zero_nugget() {
        let s = spec(6, 6);
        let (x0, y0) = s.node(1, 1);
        let (x1, y1) = s.node(4, 2);
        let (x2, y2) = s.node(2, 5);
        let obs = [
            ObservationRecord { x: x0, y: y0, duration: 100.0, counts: 250 },
            ObservationRecord { x: x1, y: y1, duration: 100.0, counts: 500 },
            ObservationRecord { x: x2, y: y2, duration: 50.0, counts: 200 },
        ];
        let vg = VariogramModel::new(0.0, 2.0, 1.5).unwrap();
        let f = build_surrogate_from_observations(&obs, s, &vg).unwrap().field;
        assert!((f.grid().get(1, 1) - 2.5).abs() < 1e-9);
        assert!((f.grid().get(4, 2) - 5.0).abs() < 1e-9);
        assert!((f.grid().get(2, 5) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn surrogate_needs_two_locations() {
        let obs = [
            ObservationRecord { x: 1.0, y: 1.0, duration: 100.0, counts: 300 },
            ObservationRecord { x: 1.0, y: 1.0, duration: 100.0, counts: 500 },
        ];
        let vg = VariogramModel::new(0.0, 5.0, 1.0).unwrap();
        assert!(build_surrogate_from_observations(&obs, spec(4, 4), &vg).is_err());
    }
}
