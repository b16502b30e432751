//! Dense power-of-two matrices and their zero-copy views.
//!
//! Storage is row-major. A [`MatView`] is an `(offset, stride)` descriptor
//! into a pool buffer, so quadrant and half extraction are O(1) and writing
//! through a view is visible in the parent buffer.

use crate::error::{require_pow2, Error, Result};
use crate::pool::{BufferId, Pool, SpaceClass};
use crate::scalar::Scalar;

/// Quadrants of a square matrix, named by (row half, column half).
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Quadrant {
    Q11,
    Q12,
    Q21,
    Q22,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Q11, Quadrant::Q12, Quadrant::Q21, Quadrant::Q22];

    /// (row half, col half) with 0 = low, 1 = high.
    fn halves(self) -> (u32, u32) {
        match self {
            Quadrant::Q11 => (0, 0),
            Quadrant::Q12 => (0, 1),
            Quadrant::Q21 => (1, 0),
            Quadrant::Q22 => (1, 1),
        }
    }
}

/// Rectangular view into a row-major pool buffer.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct MatView {
    pub buf: BufferId,
    pub row0: u32,
    pub col0: u32,
    pub rows: u32,
    pub cols: u32,
    /// Row stride of the underlying buffer (the parent's column count).
    pub stride: u32,
}

impl MatView {
    /// Flat element index of `(i, j)` relative to the view.
    #[inline]
    pub fn index(&self, i: u32, j: u32) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        ((self.row0 + i) as usize) * (self.stride as usize) + (self.col0 + j) as usize
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Quarter view of a square matrix; the four quadrants partition the
    /// parent exactly.
    pub fn quadrant(&self, q: Quadrant) -> Result<MatView> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch {
                what: "quadrant of non-square view",
            });
        }
        if self.rows < 2 {
            return Err(Error::DegenerateSplit { what: "matrix" });
        }
        let h = self.rows / 2;
        let (rh, ch) = q.halves();
        Ok(MatView {
            buf: self.buf,
            row0: self.row0 + rh * h,
            col0: self.col0 + ch * h,
            rows: h,
            cols: h,
            stride: self.stride,
        })
    }

    /// Top/bottom row halves; `half` is 0 or 1.
    pub fn row_half(&self, half: u32) -> Result<MatView> {
        if self.rows < 2 {
            return Err(Error::DegenerateSplit {
                what: "matrix rows",
            });
        }
        let h = self.rows / 2;
        Ok(MatView {
            row0: self.row0 + half * h,
            rows: h,
            ..*self
        })
    }

    /// Left/right column halves; `half` is 0 or 1.
    pub fn col_half(&self, half: u32) -> Result<MatView> {
        if self.cols < 2 {
            return Err(Error::DegenerateSplit {
                what: "matrix cols",
            });
        }
        let h = self.cols / 2;
        Ok(MatView {
            col0: self.col0 + half * h,
            cols: h,
            ..*self
        })
    }

    /// All (buffer, flat index) addresses covered by the view, row-major.
    pub fn element_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows).flat_map(move |i| (0..self.cols).map(move |j| self.index(i, j)))
    }
}

/// Owning handle for a matrix allocated in a pool.
#[derive(Copy, Clone, Debug)]
pub struct Matrix {
    pub buf: BufferId,
    pub rows: u32,
    pub cols: u32,
}

impl Matrix {
    /// Allocates a zeroed `rows x cols` matrix; both extents must be powers
    /// of two.
    pub fn alloc<S: Scalar>(
        pool: &mut Pool<S>,
        rows: u32,
        cols: u32,
        class: SpaceClass,
    ) -> Result<Matrix> {
        require_pow2("matrix rows", rows as u64)?;
        require_pow2("matrix cols", cols as u64)?;
        let buf = pool.alloc((rows as usize) * (cols as usize), class);
        Ok(Matrix { buf, rows, cols })
    }

    pub fn view(&self) -> MatView {
        MatView {
            buf: self.buf,
            row0: 0,
            col0: 0,
            rows: self.rows,
            cols: self.cols,
            stride: self.cols,
        }
    }

    pub fn get<S: Scalar>(&self, pool: &Pool<S>, i: u32, j: u32) -> S {
        pool.get(self.buf, self.view().index(i, j))
    }

    pub fn set<S: Scalar>(&self, pool: &mut Pool<S>, i: u32, j: u32, v: S) {
        pool.set(self.buf, self.view().index(i, j), v);
    }
}

/// `r` same-shaped output matrices used as disjoint accumulation targets.
///
/// Plane 0 doubles as the output: after a reduction the full result lives
/// there. Range selectors hand disjoint sub-ranges of planes to the children
/// of one parallel step.
#[derive(Clone, Debug)]
pub struct PlaneSet {
    bufs: std::sync::Arc<Vec<BufferId>>,
    pub rows: u32,
    pub cols: u32,
}

impl PlaneSet {
    /// Allocates `r` zeroed planes all at once.
    pub fn alloc<S: Scalar>(pool: &mut Pool<S>, r: u32, rows: u32, cols: u32) -> Result<PlaneSet> {
        require_pow2("plane count", r as u64)?;
        require_pow2("plane rows", rows as u64)?;
        require_pow2("plane cols", cols as u64)?;
        let bufs = (0..r)
            .map(|_| pool.alloc((rows as usize) * (cols as usize), SpaceClass::Workspace))
            .collect();
        Ok(PlaneSet {
            bufs: std::sync::Arc::new(bufs),
            rows,
            cols,
        })
    }

    pub fn r(&self) -> u32 {
        self.bufs.len() as u32
    }

    pub fn buffer(&self, k: u32) -> BufferId {
        self.bufs[k as usize]
    }

    pub fn buffers(&self) -> &std::sync::Arc<Vec<BufferId>> {
        &self.bufs
    }

    /// Full-matrix view of plane `k`.
    pub fn plane_view(&self, k: u32) -> MatView {
        MatView {
            buf: self.bufs[k as usize],
            row0: 0,
            col0: 0,
            rows: self.rows,
            cols: self.cols,
            stride: self.cols,
        }
    }

    pub fn zero_all<S: Scalar>(&self, pool: &mut Pool<S>) {
        for &b in self.bufs.iter() {
            pool.zero(b);
        }
    }
}
