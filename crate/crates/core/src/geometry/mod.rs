//! Point clouds, affine planes and the distance primitives built on them.

mod cloud;
mod lemmas;
pub(crate) mod net;
mod plane;
pub mod spatial;

pub use cloud::{hausdorff_distance, PointCloud};
pub use lemmas::{fit_isometry, verify_frame_close, FrameCloseReport, IsometryFit};
pub use plane::{
    pitagora_residual, plane_distance, point_plane_distance, project, projection_preimage,
    AffinePlane,
};

use serde::{Deserialize, Serialize};

/// An interval `[lo, hi]` enclosing an estimated nonnegative quantity.
///
/// `certified` records whether `lo` is a rigorous lower bound or only the
/// value a heuristic search converged to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub certified: bool,
}

impl Bracket {
    /// Builds a bracket, clamping `lo` into `[0, hi]`.
    ///
    /// Lowering a lower bound keeps it valid, so roundoff that pushes `lo`
    /// slightly above `hi` is absorbed here.
    pub fn new(lo: f64, hi: f64, certified: bool) -> Self {
        assert!(hi.is_finite() && lo.is_finite(), "bracket bounds must be finite");
        let hi = hi.max(0.0);
        debug_assert!(lo <= hi + 1e-9 * (1.0 + hi), "bracket lo {lo} exceeds hi {hi}");
        Bracket {
            lo: lo.clamp(0.0, hi),
            hi,
            certified,
        }
    }

    pub fn exact(value: f64) -> Self {
        Bracket::new(value, value, true)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lo - tol && value <= self.hi + tol
    }

    /// Bracket of the maximum of two quantities.
    pub fn sup(self, other: Bracket) -> Bracket {
        Bracket::new(
            self.lo.max(other.lo),
            self.hi.max(other.hi),
            self.certified && other.certified,
        )
    }

    pub fn scaled(self, factor: f64) -> Bracket {
        Bracket::new(self.lo * factor, self.hi * factor, self.certified)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_sup_takes_componentwise_max() {
        let a = Bracket::new(0.1, 0.3, true);
        let b = Bracket::new(0.2, 0.25, false);
        let s = a.sup(b);
        assert_eq!((s.lo, s.hi, s.certified), (0.2, 0.3, false));
    }

    #[test]
    fn bracket_absorbs_roundoff() {
        let b = Bracket::new(0.5 + 1e-17, 0.5, true);
        assert!(b.lo <= b.hi);
        assert_eq!(Bracket::new(-1e-18, 0.0, true).lo, 0.0);
    }
}
