//! Emotion label formats: definition, validation, min-max normalization, and
//! the input encoding consumed by label encoders.
//!
//! The default registry carries the five standard formats (VA, VAD, BE5, BE7,
//! BE8) and the equivalence classes of variables that drive soft parameter
//! sharing between prediction heads.

use std::collections::HashMap;

use crate::error::{EmoError, Result};

/// Learning problem implied by a label format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Regression,
    SingleLabel,
    MultiLabel,
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Regression => "regression",
            Problem::SingleLabel => "single_label",
            Problem::MultiLabel => "multi_label",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "regression" => Ok(Problem::Regression),
            "single_label" => Ok(Problem::SingleLabel),
            "multi_label" => Ok(Problem::MultiLabel),
            other => Err(EmoError::Config(format!("unknown problem type '{other}'"))),
        }
    }
}

/// Value range of a format's variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueRange {
    Interval { min: f64, max: f64 },
    Binary,
}

/// A named set of emotion variables with a value range and problem type.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFormat {
    pub id: String,
    pub variables: Vec<String>,
    pub range: ValueRange,
    pub problem: Problem,
}

impl LabelFormat {
    pub fn new(
        id: impl Into<String>,
        variables: &[&str],
        range: ValueRange,
        problem: Problem,
    ) -> Result<Self> {
        let id = id.into();
        let variables: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        let mut seen = std::collections::HashSet::new();
        for v in &variables {
            if !seen.insert(v) {
                return Err(EmoError::Validation(format!(
                    "duplicate variable '{v}' in format '{id}'"
                )));
            }
        }
        match (problem, range) {
            (Problem::Regression, ValueRange::Binary) => {
                return Err(EmoError::Validation(format!(
                    "regression format '{id}' requires an interval range"
                )))
            }
            (Problem::SingleLabel | Problem::MultiLabel, ValueRange::Interval { .. }) => {
                return Err(EmoError::Validation(format!(
                    "classification format '{id}' requires the binary range"
                )))
            }
            (_, ValueRange::Interval { min, max }) if min >= max => {
                return Err(EmoError::Validation(format!(
                    "format '{id}': interval min must be below max"
                )))
            }
            _ => {}
        }
        Ok(LabelFormat {
            id,
            variables,
            range,
            problem,
        })
    }

    pub fn arity(&self) -> usize {
        self.variables.len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    /// Checks a value vector against arity, range, and problem type.
    pub fn validate(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.arity() {
            return Err(EmoError::Dimension(format!(
                "format '{}' expects {} values, got {}",
                self.id,
                self.arity(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmoError::Validation("label values must be finite".into()));
        }
        match self.problem {
            Problem::Regression => {
                if let ValueRange::Interval { min, max } = self.range {
                    const TOL: f64 = 1e-9;
                    if values.iter().any(|v| *v < min - TOL || *v > max + TOL) {
                        return Err(EmoError::Validation(format!(
                            "format '{}': value outside normalized range [{min}, {max}]",
                            self.id
                        )));
                    }
                }
            }
            Problem::SingleLabel => {
                let ones = values.iter().filter(|v| **v == 1.0).count();
                if ones != 1 || values.iter().any(|v| *v != 0.0 && *v != 1.0) {
                    return Err(EmoError::Validation(format!(
                        "format '{}': single-label values must be one-hot",
                        self.id
                    )));
                }
            }
            Problem::MultiLabel => {
                if values.iter().any(|v| *v != 0.0 && *v != 1.0) {
                    return Err(EmoError::Validation(format!(
                        "format '{}': multi-label values must be in {{0,1}}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A value vector under one format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionLabel {
    pub format_id: String,
    pub values: Vec<f64>,
}

impl EmotionLabel {
    pub fn new(format_id: impl Into<String>, values: Vec<f64>) -> Self {
        EmotionLabel {
            format_id: format_id.into(),
            values,
        }
    }

    /// One-hot label for a single-label format.
    pub fn one_hot(format: &LabelFormat, variable: &str) -> Result<Self> {
        let idx = format.variable_index(variable).ok_or_else(|| {
            EmoError::Validation(format!(
                "no variable '{variable}' in format '{}'",
                format.id
            ))
        })?;
        let mut values = vec![0.0; format.arity()];
        values[idx] = 1.0;
        Ok(EmotionLabel::new(format.id.clone(), values))
    }
}

/// Per-variable source scale for min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableScale {
    pub variable: String,
    pub source_min: f64,
    pub source_max: f64,
}

impl VariableScale {
    pub fn new(variable: impl Into<String>, source_min: f64, source_max: f64) -> Result<Self> {
        if source_min >= source_max {
            return Err(EmoError::Config(
                "variable scale: source_min must be below source_max".into(),
            ));
        }
        Ok(VariableScale {
            variable: variable.into(),
            source_min,
            source_max,
        })
    }
}

/// Groups of `(format, variable)` pairs stipulated to share affective meaning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EquivalenceClasses {
    classes: Vec<Vec<(String, String)>>,
}

impl EquivalenceClasses {
    pub fn new(classes: Vec<Vec<(String, String)>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for class in &classes {
            for pair in class {
                if !seen.insert(pair.clone()) {
                    return Err(EmoError::Validation(format!(
                        "variable {}:{} appears in more than one equivalence class",
                        pair.0, pair.1
                    )));
                }
            }
        }
        Ok(EquivalenceClasses { classes })
    }

    pub fn classes(&self) -> &[Vec<(String, String)>] {
        &self.classes
    }

    pub fn member_count(&self) -> usize {
        self.classes.iter().map(|c| c.len()).sum()
    }

    pub fn class_of(&self, format_id: &str, variable: &str) -> Option<usize> {
        self.classes.iter().position(|c| {
            c.iter()
                .any(|(f, v)| f == format_id && v == variable)
        })
    }
}

/// Immutable registry of label formats plus the equivalence classes.
/// Format order is significant: it defines serialization and head indexing.
#[derive(Debug, Clone, Default)]
pub struct FormatRegistry {
    formats: Vec<LabelFormat>,
    index: HashMap<String, usize>,
    classes: EquivalenceClasses,
}

impl FormatRegistry {
    pub fn new(formats: Vec<LabelFormat>, classes: EquivalenceClasses) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, f) in formats.iter().enumerate() {
            if index.insert(f.id.clone(), i).is_some() {
                return Err(EmoError::Validation(format!(
                    "duplicate format id '{}'",
                    f.id
                )));
            }
        }
        let registry = FormatRegistry {
            formats,
            index,
            classes,
        };
        for class in registry.classes.classes() {
            for (fid, var) in class {
                let format = registry.get(fid)?;
                if format.variable_index(var).is_none() {
                    return Err(EmoError::Validation(format!(
                        "equivalence class references unknown variable {fid}:{var}"
                    )));
                }
            }
        }
        Ok(registry)
    }

    pub fn formats(&self) -> &[LabelFormat] {
        &self.formats
    }

    pub fn classes(&self) -> &EquivalenceClasses {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.formats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formats.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&LabelFormat> {
        self.index
            .get(id)
            .map(|i| &self.formats[*i])
            .ok_or_else(|| EmoError::UnknownFormat(id.to_string()))
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| EmoError::UnknownFormat(id.to_string()))
    }

    pub fn validate_label(&self, label: &EmotionLabel) -> Result<()> {
        self.get(&label.format_id)?.validate(&label.values)
    }
}

/// The five standard formats and their nine equivalence classes.
pub fn default_registry() -> FormatRegistry {
    let formats = vec![
        LabelFormat::new(
            "VA",
            &["Valence", "Arousal"],
            ValueRange::Interval { min: -1.0, max: 1.0 },
            Problem::Regression,
        )
        .unwrap(),
        LabelFormat::new(
            "VAD",
            &["Valence", "Arousal", "Dominance"],
            ValueRange::Interval { min: -1.0, max: 1.0 },
            Problem::Regression,
        )
        .unwrap(),
        LabelFormat::new(
            "BE5",
            &["Joy", "Anger", "Sad", "Fear", "Disgust"],
            ValueRange::Interval { min: 0.0, max: 1.0 },
            Problem::Regression,
        )
        .unwrap(),
        LabelFormat::new(
            "BE7",
            &["Happy", "Anger", "Sad", "Fear", "Disgust", "Surprise", "Neutral"],
            ValueRange::Binary,
            Problem::SingleLabel,
        )
        .unwrap(),
        LabelFormat::new(
            "BE8",
            &[
                "Happiness",
                "Anger",
                "Sadness",
                "Fear",
                "Disgust",
                "Surprise",
                "Neutral",
                "Contempt",
            ],
            ValueRange::Binary,
            Problem::SingleLabel,
        )
        .unwrap(),
    ];

    let pair = |f: &str, v: &str| (f.to_string(), v.to_string());
    let classes = EquivalenceClasses::new(vec![
        vec![pair("VA", "Valence"), pair("VAD", "Valence")],
        vec![pair("VA", "Arousal"), pair("VAD", "Arousal")],
        vec![pair("BE5", "Joy"), pair("BE7", "Happy"), pair("BE8", "Happiness")],
        vec![pair("BE5", "Anger"), pair("BE7", "Anger"), pair("BE8", "Anger")],
        vec![pair("BE5", "Sad"), pair("BE7", "Sad"), pair("BE8", "Sadness")],
        vec![pair("BE5", "Fear"), pair("BE7", "Fear"), pair("BE8", "Fear")],
        vec![pair("BE5", "Disgust"), pair("BE7", "Disgust"), pair("BE8", "Disgust")],
        vec![pair("BE7", "Surprise"), pair("BE8", "Surprise")],
        vec![pair("BE7", "Neutral"), pair("BE8", "Neutral")],
    ])
    .unwrap();

    FormatRegistry::new(formats, classes).unwrap()
}

/// Linearly maps raw values from their per-variable source scales onto the
/// format's target interval. Raw values slightly outside the source range are
/// clamped with a logged warning. Classification labels pass through after
/// `{0,1}` validation.
pub fn normalize(
    raw: &[f64],
    scales: &[VariableScale],
    format: &LabelFormat,
) -> Result<EmotionLabel> {
    if raw.len() != format.arity() {
        return Err(EmoError::Dimension(format!(
            "format '{}' expects {} raw values, got {}",
            format.id,
            format.arity(),
            raw.len()
        )));
    }
    match format.problem {
        Problem::Regression => {
            let (tmin, tmax) = match format.range {
                ValueRange::Interval { min, max } => (min, max),
                ValueRange::Binary => unreachable!("validated at construction"),
            };
            let mut values = Vec::with_capacity(raw.len());
            for (i, var) in format.variables.iter().enumerate() {
                let scale = scales
                    .iter()
                    .find(|s| &s.variable == var)
                    .ok_or_else(|| {
                        EmoError::Config(format!(
                            "missing scale for variable '{var}' of format '{}'",
                            format.id
                        ))
                    })?;
                let mut r = raw[i];
                if r < scale.source_min || r > scale.source_max {
                    log::warn!(
                        "value {r} for {}:{var} outside source range [{}, {}]; clamping",
                        format.id,
                        scale.source_min,
                        scale.source_max
                    );
                    r = r.clamp(scale.source_min, scale.source_max);
                }
                let t = (r - scale.source_min) / (scale.source_max - scale.source_min);
                values.push(tmin + t * (tmax - tmin));
            }
            Ok(EmotionLabel::new(format.id.clone(), values))
        }
        Problem::SingleLabel | Problem::MultiLabel => {
            let label = EmotionLabel::new(format.id.clone(), raw.to_vec());
            format.validate(&label.values)?;
            Ok(label)
        }
    }
}

/// Inverse of [`normalize`] for regression formats.
pub fn denormalize(label: &EmotionLabel, scales: &[VariableScale], format: &LabelFormat) -> Result<Vec<f64>> {
    if format.problem != Problem::Regression {
        return Err(EmoError::Unsupported(format!(
            "denormalize only applies to regression formats, '{}' is {}",
            format.id,
            format.problem.name()
        )));
    }
    let (tmin, tmax) = match format.range {
        ValueRange::Interval { min, max } => (min, max),
        ValueRange::Binary => unreachable!(),
    };
    let mut out = Vec::with_capacity(label.values.len());
    for (i, var) in format.variables.iter().enumerate() {
        let scale = scales
            .iter()
            .find(|s| &s.variable == var)
            .ok_or_else(|| EmoError::Config(format!("missing scale for variable '{var}'")))?;
        let t = (label.values[i] - tmin) / (tmax - tmin);
        out.push(scale.source_min + t * (scale.source_max - scale.source_min));
    }
    Ok(out)
}

/// Input vector fed to a label encoder: regression values, a one-hot vector,
/// or a binary vector, depending on the format's problem type.
pub fn encode_input(label: &EmotionLabel, format: &LabelFormat) -> Result<Vec<f64>> {
    format.validate(&label.values)?;
    Ok(label.values.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vad_scales() -> Vec<VariableScale> {
        ["Valence", "Arousal", "Dominance"]
            .iter()
            .map(|v| VariableScale::new(*v, 1.0, 9.0).unwrap())
            .collect()
    }

    #[test]
    fn default_registry_contents() {
        let reg = default_registry();
        assert_eq!(reg.len(), 5);
        let vad = reg.get("VAD").unwrap();
        assert_eq!(vad.variables, vec!["Valence", "Arousal", "Dominance"]);

        let joy = reg.classes().class_of("BE5", "Joy").unwrap();
        assert_eq!(reg.classes().class_of("BE7", "Happy"), Some(joy));
        assert_eq!(reg.classes().class_of("BE8", "Happiness"), Some(joy));

        let val = reg.classes().class_of("VA", "Valence").unwrap();
        assert_eq!(reg.classes().class_of("VAD", "Valence"), Some(val));
        assert_eq!(reg.classes().class_of("VAD", "Dominance"), None);
    }

    #[test]
    fn default_registry_class_partition() {
        let reg = default_registry();
        assert_eq!(reg.classes().classes().len(), 9);
        // 2+2 dimensional pairs, 5 three-way basic-emotion classes, plus
        // Surprise and Neutral pairs.
        assert_eq!(reg.classes().member_count(), 23);
        // every referenced pair exists, and no pair is in two classes
        let mut seen = std::collections::HashSet::new();
        for class in reg.classes().classes() {
            for (f, v) in class {
                assert!(reg.get(f).unwrap().variable_index(v).is_some());
                assert!(seen.insert((f.clone(), v.clone())));
            }
        }
    }

    #[test]
    fn normalize_vad_rollercoaster() {
        let reg = default_registry();
        let label = normalize(&[8.0, 8.1, 5.1], &vad_scales(), reg.get("VAD").unwrap()).unwrap();
        let expect = [0.75, 0.775, 0.025];
        for (a, b) in label.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn normalize_be5_joy() {
        let reg = default_registry();
        let scales: Vec<VariableScale> = ["Joy", "Anger", "Sad", "Fear", "Disgust"]
            .iter()
            .map(|v| VariableScale::new(*v, 1.0, 5.0).unwrap())
            .collect();
        let label = normalize(
            &[3.4, 1.0, 1.0, 1.0, 1.0],
            &scales,
            reg.get("BE5").unwrap(),
        )
        .unwrap();
        assert!((label.values[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn normalize_va_mixed_scales() {
        let reg = default_registry();
        let scales = vec![
            VariableScale::new("Valence", -3.0, 3.0).unwrap(),
            VariableScale::new("Arousal", 1.0, 9.0).unwrap(),
        ];
        let label = normalize(&[2.8, 4.0], &scales, reg.get("VA").unwrap()).unwrap();
        assert!((label.values[0] - 0.9333333333333333).abs() < 1e-12);
        assert!((label.values[1] - (-0.25)).abs() < 1e-12);
    }

    #[test]
    fn normalize_missing_scale_errors() {
        let reg = default_registry();
        let scales = vec![VariableScale::new("Valence", 1.0, 9.0).unwrap()];
        assert!(matches!(
            normalize(&[5.0, 5.0], &scales, reg.get("VA").unwrap()),
            Err(EmoError::Config(_))
        ));
    }

    #[test]
    fn normalize_monotone_and_endpoints() {
        let reg = default_registry();
        let format = reg.get("VAD").unwrap();
        let scales = vad_scales();
        let lo = normalize(&[1.0, 1.0, 1.0], &scales, format).unwrap();
        let hi = normalize(&[9.0, 9.0, 9.0], &scales, format).unwrap();
        assert_eq!(lo.values, vec![-1.0, -1.0, -1.0]);
        assert_eq!(hi.values, vec![1.0, 1.0, 1.0]);
        let a = normalize(&[4.0, 4.0, 4.0], &scales, format).unwrap();
        let b = normalize(&[4.5, 4.5, 4.5], &scales, format).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x < y));
    }

    #[test]
    fn denormalize_round_trip() {
        let reg = default_registry();
        let format = reg.get("VAD").unwrap();
        let scales = vad_scales();
        let label = normalize(&[8.0, 8.1, 5.1], &scales, format).unwrap();
        let raw = denormalize(&label, &scales, format).unwrap();
        for (a, b) in raw.iter().zip([8.0, 8.1, 5.1]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn denormalize_rejects_classification() {
        let reg = default_registry();
        let format = reg.get("BE7").unwrap();
        let label = EmotionLabel::one_hot(format, "Anger").unwrap();
        assert!(matches!(
            denormalize(&label, &[], format),
            Err(EmoError::Unsupported(_))
        ));
    }

    #[test]
    fn encode_input_cases() {
        let reg = default_registry();
        let be7 = reg.get("BE7").unwrap();
        let anger = EmotionLabel::one_hot(be7, "Anger").unwrap();
        assert_eq!(
            encode_input(&anger, be7).unwrap(),
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );

        let va = reg.get("VA").unwrap();
        let label = EmotionLabel::new("VA", vec![0.5, -0.5]);
        assert_eq!(encode_input(&label, va).unwrap(), vec![0.5, -0.5]);

        let zeros = EmotionLabel::new("BE7", vec![0.0; 7]);
        assert!(matches!(
            encode_input(&zeros, be7),
            Err(EmoError::Validation(_))
        ));
    }

    #[test]
    fn validation_and_encode_input_agree() {
        let reg = default_registry();
        let be7 = reg.get("BE7").unwrap();
        let candidates = [
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0; 7],
            vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        ];
        for values in candidates {
            let label = EmotionLabel::new("BE7", values);
            assert_eq!(
                be7.validate(&label.values).is_ok(),
                encode_input(&label, be7).is_ok()
            );
        }
    }
}
