//! The experiment registry: every runnable experiment with a one-line
//! account of what it estimates and which config keys it reads. The table
//! is kept sorted by name so `rwdre list` output is stable.

#[derive(Debug, Clone, Copy)]
pub struct ExperimentInfo {
    pub name: &'static str,
    /// What the experiment estimates, in terms of its output rows.
    pub summary: &'static str,
    /// Config keys the experiment consumes, beyond the common scalars.
    pub schema: &'static str,
}

pub const EXPERIMENTS: [ExperimentInfo; 7] = [
    ExperimentInfo {
        name: "bracket",
        summary: "Per horizon, the tightest grid speeds whose overshoot and undershoot \
                  frequencies over window starts stay at or below theta.",
        schema: "walker; params: theta (default 0.05); grid: horizons, speeds; \
                 rows only for attained bounds (key2 = v_plus | v_minus)",
    },
    ExperimentInfo {
        name: "concentration",
        summary: "Frequency of |X_t/t - v_hat| >= eps across a time grid; v_hat defaults \
                  to a pilot mean-speed estimate at the largest time.",
        schema: "walker; params: eps, v_hat (optional); grid: times",
    },
    ExperimentInfo {
        name: "counterexample_fluct",
        summary: "Up/down tail frequencies of the rectangle-soup drift walker at \
                  ladder-scale horizons, next to a concentrating spin-flip baseline.",
        schema: "model = counterexample (model_params: l0); params: forced_gray \
                 (default false); grid: scales (ladder indices)",
    },
    ExperimentInfo {
        name: "mixing_profile",
        summary: "Covariance between a box observable and its time-shifted copy over a \
                  separation grid, plus a power-law or exponential decay fit.",
        schema: "params: observable (table: region, kind); grid: separations",
    },
    ExperimentInfo {
        name: "speed",
        summary: "Mean empirical speed X_T/T with a confidence interval at each horizon; \
                  east targets track the distinguished zero or the leftmost zero front.",
        schema: "walker, or params: target = distinguished_zero | front (east only); \
                 grid: horizons",
    },
    ExperimentInfo {
        name: "threatened_census",
        summary: "Mean fraction of coarse checkpoints along a reference path that are \
                  threatened: some anchor on the forward slope cone is trapped.",
        schema: "walker; params: delta, v_plus, v_minus, k_bar, l0, variant \
                 (main | counterexample, default main); grid: horizons (single)",
    },
    ExperimentInfo {
        name: "trapped_census",
        summary: "Fraction of plane anchors that are trapped: every window start near \
                  the anchor stays below v_minus over one horizon.",
        schema: "walker; params: delta, v_minus; grid: horizons (single), anchors_x, \
                 anchors_t",
    },
];

pub fn lookup(name: &str) -> Option<&'static ExperimentInfo> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}
