//! Adaptive octree meshes over a cube, with caller-supplied refinement and
//! exclusion predicates.
//!
//! The octree splits a cell while the refinement predicate asks for it or
//! while the cell straddles the excluded region, up to a depth limit; at the
//! depth limit straddling cells are classified by their center (a point is a
//! cell of zero half-width). Dropped volume is tracked so that kept volume
//! plus excluded volume always equals the root volume exactly.

use crate::geometry::{Aabb, Point3};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("octree cell budget exhausted ({limit} cells visited)")]
    Budget { limit: usize },
}

/// Cube cell: center, half-width, subdivision depth.
#[derive(Clone, Copy, Debug)]
pub struct Cell<T> {
    pub center: Point3<T>,
    pub half: T,
    pub depth: u32,
}

impl<T: Real> Cell<T> {
    pub fn cube(center: Point3<T>, half: T) -> Self {
        Self {
            center,
            half,
            depth: 0,
        }
    }

    /// Smallest cube covering the box.
    pub fn enclosing(bb: &Aabb<T>) -> Self {
        Self::cube(bb.center(), bb.cube_half())
    }

    #[inline]
    pub fn size(&self) -> T {
        self.half * T::of(2.0)
    }

    #[inline]
    pub fn volume(&self) -> T {
        let s = self.size();
        s * s * s
    }

    fn children(&self) -> [Cell<T>; 8] {
        let h = self.half * T::of(0.5);
        let c = self.center;
        let mut out = [*self; 8];
        for (i, cell) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -h } else { h };
            let sy = if i & 2 == 0 { -h } else { h };
            let sz = if i & 4 == 0 { -h } else { h };
            cell.center = Point3::new(c.x + sx, c.y + sy, c.z + sz);
            cell.half = h;
            cell.depth = self.depth + 1;
        }
        out
    }
}

/// How a cell sits relative to the excluded region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exclusion {
    /// Entirely inside the excluded region: the cell is dropped.
    Inside,
    /// Entirely outside the excluded region: the cell may be kept.
    Outside,
    /// Crosses the boundary: the cell must be split (or center-tested at the
    /// depth limit).
    Straddles,
}

#[derive(Clone, Copy, Debug)]
pub struct OctreeParams {
    pub max_depth: u32,
    /// Bound on total cells visited during the build.
    pub max_cells: usize,
}

impl Default for OctreeParams {
    fn default() -> Self {
        Self {
            max_depth: 12,
            max_cells: 4_000_000,
        }
    }
}

pub struct OctreeMesh<T> {
    root: Cell<T>,
    leaves: Vec<Cell<T>>,
    excluded_volume: T,
}

impl<T: Real> OctreeMesh<T> {
    pub fn build(
        root: Cell<T>,
        params: &OctreeParams,
        refine: &impl Fn(&Cell<T>) -> bool,
        exclude: &impl Fn(&Cell<T>) -> Exclusion,
    ) -> Result<Self, MeshError> {
        let mut mesh = Self {
            root,
            leaves: Vec::new(),
            excluded_volume: T::zero(),
        };
        let mut visited = 0usize;
        let mut stack = vec![root];
        while let Some(cell) = stack.pop() {
            visited += 1;
            if visited > params.max_cells {
                return Err(MeshError::Budget {
                    limit: params.max_cells,
                });
            }
            let class = exclude(&cell);
            if class == Exclusion::Inside {
                mesh.excluded_volume += cell.volume();
                continue;
            }
            let wants_split = refine(&cell) || class == Exclusion::Straddles;
            if wants_split && cell.depth < params.max_depth {
                stack.extend(cell.children());
                continue;
            }
            if class == Exclusion::Straddles {
                // Depth limit: classify by the cell center, i.e. a zero-size
                // cell at the same position.
                let probe = Cell {
                    center: cell.center,
                    half: T::zero(),
                    depth: cell.depth,
                };
                if exclude(&probe) == Exclusion::Inside {
                    mesh.excluded_volume += cell.volume();
                    continue;
                }
            }
            mesh.leaves.push(cell);
        }
        Ok(mesh)
    }

    #[inline]
    pub fn root(&self) -> &Cell<T> {
        &self.root
    }

    #[inline]
    pub fn leaves(&self) -> &[Cell<T>] {
        &self.leaves
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn kept_volume(&self) -> T {
        let mut v = T::zero();
        for c in &self.leaves {
            v += c.volume();
        }
        v
    }

    #[inline]
    pub fn excluded_volume(&self) -> T {
        self.excluded_volume
    }
}

/// A mesh with one density value per leaf, sampled at the leaf center.
pub struct DensityMesh<T> {
    cells: Vec<(Cell<T>, T)>,
}

impl<T: Real> DensityMesh<T> {
    pub fn tabulate(mesh: &OctreeMesh<T>, mut density: impl FnMut(Point3<T>) -> T) -> Self {
        let cells = mesh
            .leaves()
            .iter()
            .map(|&c| (c, density(c.center)))
            .collect();
        Self { cells }
    }

    pub fn from_cells(cells: Vec<(Cell<T>, T)>) -> Self {
        Self { cells }
    }

    #[inline]
    pub fn cells(&self) -> &[(Cell<T>, T)] {
        &self.cells
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Midpoint-rule mass: sum of density times cell volume.
    pub fn total_mass(&self) -> T {
        let mut m = T::zero();
        for (c, rho) in &self.cells {
            m += *rho * c.volume();
        }
        m
    }
}
