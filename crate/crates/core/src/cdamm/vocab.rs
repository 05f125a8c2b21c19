use crate::imaging::IMAGING_FINDINGS;
use crate::medrecords::{Finding, REPORT_FINDINGS};
use crate::questionnaire::QuestionnaireDefinition;

pub const ASTHMA: &str = "asthma";
pub const HEALTHY: &str = "healthy";

/// Shipped disease list, in code order.
pub const DISEASES: [&str; 7] =
    [ASTHMA, "copd", "chronic_bronchitis", "pneumonia", "tuberculosis", "restrictive_lung_disease", HEALTHY];

/// Presented when a patient shows no other sign at all.
pub const NO_FINDINGS: &str = "no_findings";

/// Question ids of both definitions, then report findings, imaging findings
/// and the reserved empty-presentation sign.
pub fn default_signs(core: &QuestionnaireDefinition, professional: &QuestionnaireDefinition) -> Vec<String> {
    core.questions()
        .chain(professional.questions())
        .map(|q| q.id.clone())
        .chain(REPORT_FINDINGS.iter().map(|s| s.to_string()))
        .chain(IMAGING_FINDINGS.iter().map(|s| s.to_string()))
        .chain(std::iter::once(NO_FINDINGS.to_string()))
        .collect()
}

/// Sign ids in presentation order; never empty.
pub fn sign_sequence(findings: &[Finding]) -> Vec<String> {
    if findings.is_empty() {
        vec![NO_FINDINGS.to_string()]
    } else {
        findings.iter().map(|f| f.id.clone()).collect()
    }
}
