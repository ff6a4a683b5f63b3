//! Parameter grid parsing.
//!
//! A grid is a comma-separated list of axes, one per model parameter, each
//! of the form `name=start:step:end`. Endpoints and steps are kept as exact
//! rationals, so an axis like `0.002:0.002:0.998` produces exactly 499
//! points with no floating-point drift and includes the end point precisely
//! when some multiple of the step lands on it.

use std::fmt;

use parmc::Rational;

#[derive(Debug, Clone)]
pub struct GridAxis {
    pub name: String,
    pub start: Rational,
    pub step: Rational,
    pub end: Rational,
}

impl GridAxis {
    /// Sample points on this axis: start, start + step, ... while <= end.
    pub fn points(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        let mut v = self.start.clone();
        while v <= self.end {
            out.push(v.clone());
            v = &v + &self.step;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    /// Cartesian product of the axis point lists. The first axis varies
    /// slowest, so rows group into blocks per outer-parameter value.
    pub fn points(&self) -> Vec<Vec<Rational>> {
        let per_axis: Vec<Vec<Rational>> = self.axes.iter().map(GridAxis::points).collect();
        let total = per_axis.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        let mut current = Vec::with_capacity(per_axis.len());
        fn walk(per_axis: &[Vec<Rational>], current: &mut Vec<Rational>, out: &mut Vec<Vec<Rational>>) {
            match per_axis.split_first() {
                None => out.push(current.clone()),
                Some((axis, rest)) => {
                    for v in axis {
                        current.push(v.clone());
                        walk(rest, current, out);
                        current.pop();
                    }
                }
            }
        }
        walk(&per_axis, &mut current, &mut out);
        out
    }

    /// Per-axis midpoint between the first and last sample, the default
    /// well-formedness witness.
    pub fn centroid(&self) -> Vec<Rational> {
        let half: Rational = "1/2".parse().unwrap();
        self.axes
            .iter()
            .map(|axis| {
                let pts = axis.points();
                let last = pts.last().expect("axis has at least one point");
                &(&axis.start + last) * &half
            })
            .collect()
    }
}

#[derive(Debug)]
pub enum GridError {
    Malformed(String),
    UnknownParameter(String),
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::Malformed(msg) => write!(f, "malformed grid: {msg}"),
            GridError::UnknownParameter(name) => {
                write!(f, "grid axis `{name}` does not match any model parameter")
            }
        }
    }
}

pub fn parse_grid(text: &str) -> Result<GridSpec, GridError> {
    let mut axes: Vec<GridAxis> = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let (name, range) = part
            .split_once('=')
            .ok_or_else(|| GridError::Malformed(format!("expected name=start:step:end, got `{part}`")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(GridError::Malformed(format!("empty axis name in `{part}`")));
        }
        if axes.iter().any(|a| a.name == name) {
            return Err(GridError::Malformed(format!("axis `{name}` given twice")));
        }
        let fields: Vec<&str> = range.split(':').collect();
        let [start, step, end] = fields.as_slice() else {
            return Err(GridError::Malformed(format!(
                "axis `{name}` needs start:step:end, got `{range}`"
            )));
        };
        let parse = |field: &str, what: &str| -> Result<Rational, GridError> {
            field.trim().parse().map_err(|_| {
                GridError::Malformed(format!("axis `{name}`: cannot parse {what} `{field}`"))
            })
        };
        let start = parse(start, "start")?;
        let step = parse(step, "step")?;
        let end = parse(end, "end")?;
        if !step.is_positive() {
            return Err(GridError::Malformed(format!("axis `{name}`: step must be positive")));
        }
        if start > end {
            return Err(GridError::Malformed(format!(
                "axis `{name}`: start exceeds end"
            )));
        }
        axes.push(GridAxis { name: name.to_string(), start, step, end });
    }
    Ok(GridSpec { axes })
}

/// Checks the axes against the declared parameter list and reorders them to
/// declaration order, so grid iteration and output columns follow the model.
pub fn align_to_parameters(spec: GridSpec, params: &[String]) -> Result<GridSpec, GridError> {
    for axis in &spec.axes {
        if !params.contains(&axis.name) {
            return Err(GridError::UnknownParameter(axis.name.clone()));
        }
    }
    let mut axes = Vec::with_capacity(params.len());
    for name in params {
        let axis = spec
            .axes
            .iter()
            .find(|a| &a.name == name)
            .ok_or_else(|| GridError::Malformed(format!("no axis for parameter `{name}`")))?;
        axes.push(axis.clone());
    }
    Ok(GridSpec { axes })
}
