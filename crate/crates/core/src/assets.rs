//! Default configuration files compiled into the binary.

pub const HINTS_JSON: &str = include_str!("../assets/hints.json");
pub const LEXICON_TSV: &str = include_str!("../assets/lexicon.tsv");
pub const POLICY_TOML: &str = include_str!("../assets/policy.toml");
pub const TAXONOMY_TOML: &str = include_str!("../assets/taxonomy.toml");
pub const PROFILE_YAML: &str = include_str!("../assets/profile.yaml");
pub const MOCK_FIXTURE_JSON: &str = include_str!("../assets/mock_fixture.json");

/// Sample knowledge-base documents as `(file name, contents)`.
pub const CORPUS: &[(&str, &str)] = &[
    ("abortion_law.md", include_str!("../assets/corpus/abortion_law.md")),
    ("age_of_consent.md", include_str!("../assets/corpus/age_of_consent.md")),
    ("alcohol.md", include_str!("../assets/corpus/alcohol.md")),
    ("conceiving.md", include_str!("../assets/corpus/conceiving.md")),
    ("condom.md", include_str!("../assets/corpus/condom.md")),
    ("copper_t.md", include_str!("../assets/corpus/copper_t.md")),
    ("diaphragm.md", include_str!("../assets/corpus/diaphragm.md")),
    ("emergency_pill.md", include_str!("../assets/corpus/emergency_pill.md")),
    ("free_services.md", include_str!("../assets/corpus/free_services.md")),
    ("hiv_condoms.md", include_str!("../assets/corpus/hiv_condoms.md")),
    ("home_remedies.md", include_str!("../assets/corpus/home_remedies.md")),
    ("ivf.md", include_str!("../assets/corpus/ivf.md")),
    ("miscarriage.md", include_str!("../assets/corpus/miscarriage.md")),
    ("period_diet.md", include_str!("../assets/corpus/period_diet.md")),
    ("periods.md", include_str!("../assets/corpus/periods.md")),
    ("risky_illness.md", include_str!("../assets/corpus/risky_illness.md")),
    ("saheli.md", include_str!("../assets/corpus/saheli.md")),
    ("sex_selection.md", include_str!("../assets/corpus/sex_selection.md")),
    ("sperm.md", include_str!("../assets/corpus/sperm.md")),
    ("sterilization_care.md", include_str!("../assets/corpus/sterilization_care.md")),
    ("vasectomy.md", include_str!("../assets/corpus/vasectomy.md")),
];
