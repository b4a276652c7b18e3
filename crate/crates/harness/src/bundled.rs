/// Scenarios shipped with the binary, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("circle-baseline", include_str!("../scenarios/circle-baseline.toml")),
    ("suspension-theorem", include_str!("../scenarios/suspension-theorem.toml")),
    ("fgr-collapse", include_str!("../scenarios/fgr-collapse.toml")),
    ("heat-limits", include_str!("../scenarios/heat-limits.toml")),
    ("compare-circle", include_str!("../scenarios/compare-circle.toml")),
    ("compare-two-point", include_str!("../scenarios/compare-two-point.toml")),
    ("compare-iterated", include_str!("../scenarios/compare-iterated.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}
