//! Rosters in, estimation sample out.

mod design;
mod dyads;
mod geo;
mod records;

pub use design::{build_design, ColumnRule, Covariate, DesignMatrices, DesignSpec, Transform, INTERCEPT};
pub use dyads::{
    active_subsample, build_dyads, career_age, mark_activity, read_dyads, write_dyads, BuildOutput,
    BuildReport, DyadRow,
};
pub use geo::{haversine_km, EARTH_RADIUS_KM};
pub use records::{
    load_departments, load_scholars, load_seminars, read_departments, read_scholars, read_seminars,
    write_departments, write_scholars, write_seminars, DepartmentRecord, Loaded, Rejection,
    ScholarRecord, SeminarEvent, DEFAULT_REFERENCE_YEAR, MIN_PROFESSORS,
};
