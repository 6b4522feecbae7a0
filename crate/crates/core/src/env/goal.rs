use alloc::vec::Vec;

/// One scalar feature of the state with an admissible band
/// `|feature(s) - center| <= half_width`.
#[derive(Clone, Copy)]
pub struct GoalFeature<S> {
    pub name: &'static str,
    pub extract: fn(&S) -> f64,
    pub center: f64,
    pub half_width: f64,
}

impl<S> GoalFeature<S> {
    /// Signed excess over the band; non-positive inside.
    pub fn excess(&self, state: &S) -> f64 {
        ((self.extract)(state) - self.center).abs() - self.half_width
    }
}

impl<S> core::fmt::Debug for GoalFeature<S> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GoalFeature")
            .field("name", &self.name)
            .field("center", &self.center)
            .field("half_width", &self.half_width)
            .finish()
    }
}

/// Goal set given as a box in feature space.
///
/// The distance is the infinity-norm excess over the box:
/// `max_i max(0, |f_i(s) - c_i| - w_i)`. It is zero exactly on members.
#[derive(Debug, Clone)]
pub struct GoalSet<S> {
    features: Vec<GoalFeature<S>>,
}

impl<S> GoalSet<S> {
    pub fn new(features: Vec<GoalFeature<S>>) -> Self {
        Self { features }
    }

    pub fn features(&self) -> &[GoalFeature<S>] {
        &self.features
    }

    pub fn distance(&self, state: &S) -> f64 {
        self.features
            .iter()
            .map(|f| f.excess(state))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, state: &S) -> bool {
        self.features.iter().all(|f| f.excess(state) <= 0.0)
    }
}
