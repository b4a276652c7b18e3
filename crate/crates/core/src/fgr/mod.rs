//! Heat-trace functionals and the FGR dga: universal forms modulo the kernel
//! of the `∮` seminorm and its differential image.

mod heat;
mod kspace;

pub use heat::{
    bind_level, check_tail, heat_int, heat_oint, heat_weights, richardson, tail_ok, HeatLimit, HeatSchedule,
    TAIL_TOL,
};
pub use kspace::{
    compare_dgas, cross_term_vanishing, fgr_dga_dims, functional_consistency, heat_gram, heat_oint_inner, is_marginal,
    k_membership, ComparisonInput, ComparisonReport, ComparisonRow, ConsistencyReport, ConsistencyRow, CrossTermReport,
    CrossTermRow, FgrOptions, FunctionalSample, HeatGram, KSpaceDegree, KSpaceReport, MembershipVerdict,
    DEFAULT_FULL_GRAM_LIMIT, DEFAULT_K_TOL, DEFAULT_MAX_FACTOR_DIM, VERDICT_FGR_CONSTANT, VERDICT_FGR_DISTINGUISHES,
    VERDICT_NONE,
};
