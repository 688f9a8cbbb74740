use serde::{Deserialize, Serialize};

use crate::dcnn::Tensor3;
use crate::error::{Error, Result};

/// Spatial layout of a tabular row. The `d` attribute values fill a block of
/// `inner` columns row-major (trailing cells zero); the block sits `offset`
/// cells from the top and left of a `height × width` zero grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
    pub pad_count: usize,
    pub inner: usize,
    pub offset: usize,
}

impl GridShape {
    /// Square grid of side `ceil(sqrt(d))`.
    pub fn square(d: usize) -> GridShape {
        let side = ceil_sqrt(d).max(1);
        GridShape {
            height: side,
            width: side,
            pad_count: side * side - d,
            inner: side,
            offset: 0,
        }
    }

    /// The `ceil(sqrt(d))` square block centred in a square grid of side
    /// `min_side` (when larger); an odd margin puts the extra cell
    /// bottom-right.
    pub fn square_at_least(d: usize, min_side: usize) -> GridShape {
        let base = GridShape::square(d);
        if min_side <= base.height {
            return base;
        }
        GridShape {
            height: min_side,
            width: min_side,
            pad_count: min_side * min_side - d,
            inner: base.inner,
            offset: (min_side - base.inner) / 2,
        }
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn attributes(&self) -> usize {
        self.cells() - self.pad_count
    }
}

fn ceil_sqrt(d: usize) -> usize {
    let mut s = (d as f64).sqrt() as usize;
    while s * s < d {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= d {
        s -= 1;
    }
    s
}

/// How the grid side is chosen for a dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPolicy {
    /// `ceil(sqrt(d))`; a network whose layers do not fit is rejected.
    #[default]
    Square,
    /// The square block, centred in a zero grid of the smallest side the
    /// network's layer chain accepts when the square itself is too small.
    FitNetwork,
}

impl GridPolicy {
    pub fn resolve(self, d: usize, network_min_side: usize) -> GridShape {
        match self {
            GridPolicy::Square => GridShape::square(d),
            GridPolicy::FitNetwork => GridShape::square_at_least(d, network_min_side),
        }
    }
}

impl std::str::FromStr for GridPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(GridPolicy::Square),
            "fit" | "fit-network" => Ok(GridPolicy::FitNetwork),
            other => Err(Error::InvalidArgument(format!(
                "unknown grid policy {other:?} (expected square or fit)"
            ))),
        }
    }
}

/// Places a row on its square grid (one channel).
pub fn to_grid(instance: &[f64]) -> Tensor3 {
    to_grid_with(instance, GridShape::square(instance.len())).expect("square grid always fits")
}

pub fn to_grid_with(instance: &[f64], shape: GridShape) -> Result<Tensor3> {
    if shape.attributes() != instance.len() {
        return Err(Error::ShapeMismatch(format!(
            "grid {}x{} holds {} attributes, row has {}",
            shape.height,
            shape.width,
            shape.attributes(),
            instance.len()
        )));
    }
    let mut values = vec![0.0; shape.cells()];
    for (k, &v) in instance.iter().enumerate() {
        let (r, c) = (shape.offset + k / shape.inner, shape.offset + k % shape.inner);
        values[r * shape.width + c] = v;
    }
    Tensor3::from_vec(1, shape.height, shape.width, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_sides() {
        assert_eq!(
            GridShape::square(64),
            GridShape {
                height: 8,
                width: 8,
                pad_count: 0,
                inner: 8,
                offset: 0,
            }
        );
        assert_eq!(GridShape::square(10).height, 4);
        assert_eq!(GridShape::square(10).pad_count, 6);
        assert_eq!(GridShape::square(280).height, 17);
        assert_eq!(GridShape::square(280).pad_count, 9);
        assert_eq!(GridShape::square(1).height, 1);
        assert_eq!(GridShape::square_at_least(16, 10).height, 10);
        assert_eq!(GridShape::square_at_least(16, 10).pad_count, 84);
        assert_eq!(GridShape::square_at_least(16, 10).offset, 3);
        assert_eq!(GridShape::square_at_least(64, 5), GridShape::square(64));
    }

    #[test]
    fn padded_grid_centres_the_square_block() {
        let row: Vec<f64> = (1..=5).map(f64::from).collect();
        let g = to_grid_with(&row, GridShape::square_at_least(5, 6)).unwrap();
        // 3x3 block at offset 1 inside 6x6
        assert_eq!(g.get(0, 1, 1), 1.0);
        assert_eq!(g.get(0, 1, 3), 3.0);
        assert_eq!(g.get(0, 2, 2), 5.0);
        assert_eq!(g.values.iter().filter(|&&v| v != 0.0).count(), 5);
    }

    #[test]
    fn ten_values_land_row_major_with_trailing_zeros() {
        let row: Vec<f64> = (1..=10).map(f64::from).collect();
        let g = to_grid(&row);
        assert_eq!(g.shape(), (1, 4, 4));
        assert_eq!(g.get(0, 0, 3), 4.0);
        assert_eq!(g.get(0, 2, 1), 10.0);
        assert!(g.values[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_shape_is_rejected() {
        assert!(to_grid_with(&[1.0, 2.0], GridShape::square(3)).is_err());
    }

    proptest! {
        #[test]
        fn flatten_recovers_the_row(row in prop::collection::vec(-1e6f64..1e6, 1..300)) {
            let g = to_grid(&row);
            let s = g.height;
            prop_assert!(s * s >= row.len());
            prop_assert!(s == 1 || (s - 1) * (s - 1) < row.len());
            prop_assert_eq!(&g.values[..row.len()], &row[..]);
        }
    }
}
