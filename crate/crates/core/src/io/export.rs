use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::IoError;
use crate::evaluation::{EvalConfig, PreparedCorpus};
use crate::pipelines::Approach;

/// Column names of an exported feature matrix.
pub fn matrix_header(approach: Approach, config: &EvalConfig, num_answers: usize) -> Vec<String> {
    let mut header = vec!["case_id".to_string()];
    header.extend(config.mask.names().into_iter().map(String::from));
    match approach {
        Approach::Amp => header.extend(config.methods.methods().iter().map(|m| format!("O_{m}"))),
        Approach::Dap => {
            for m in config.methods.methods() {
                header.extend((0..num_answers).map(|a| format!("f_{m}_{a}")));
            }
            header.push("correct".into());
        }
    }
    header
}

/// Writes one row per case: the masked features, then the outcome labels
/// (method prediction) or the one-hot method choices and the correct
/// answer index (answer prediction).
pub fn write_feature_matrix(
    w: impl Write,
    corpus: &PreparedCorpus,
    approach: Approach,
    config: &EvalConfig,
) -> Result<(), IoError> {
    let num_answers = corpus.cases().first().map_or(0, |c| c.num_answers);
    if approach == Approach::Dap {
        if let Some(c) = corpus.cases().iter().find(|c| c.num_answers != num_answers) {
            return Err(IoError::Write(format!(
                "case `{}` has {} answers; an answer-prediction matrix needs {num_answers} throughout",
                c.case_id, c.num_answers
            )));
        }
    }
    let werr = |e: csv::Error| IoError::Write(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(matrix_header(approach, config, num_answers))
        .map_err(werr)?;
    for case in corpus.cases() {
        let mut record = vec![case.case_id.clone()];
        match approach {
            Approach::Amp => {
                record.extend(case.amp_features(&config.mask).iter().map(f64::to_string));
                let labels = case
                    .outcomes(&config.methods)
                    .map_err(|e| IoError::Write(e.to_string()))?;
                record.extend(labels.iter().map(|b| u8::from(*b).to_string()));
            }
            Approach::Dap => {
                record.extend(
                    case.dap_features(&config.mask, &config.methods)
                        .iter()
                        .map(f64::to_string),
                );
                let correct = case
                    .correct_answer()
                    .map_err(|e| IoError::Write(e.to_string()))?;
                record.push(correct.to_string());
            }
        }
        out.write_record(&record).map_err(werr)?;
    }
    out.flush().map_err(|e| IoError::Write(e.to_string()))
}

pub fn export_feature_matrix(
    path: &Path,
    corpus: &PreparedCorpus,
    approach: Approach,
    config: &EvalConfig,
) -> Result<(), IoError> {
    let file =
        File::create(path).map_err(|e| IoError::Write(format!("{}: {e}", path.display())))?;
    write_feature_matrix(std::io::BufWriter::new(file), corpus, approach, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_model::tests::case_x;
    use crate::features::{FeatureGroup, FeatureMask, SubgroupPlan};

    fn matrix(approach: Approach, config: &EvalConfig) -> Vec<Vec<String>> {
        let corpus = PreparedCorpus::prepare(&[case_x()], &SubgroupPlan::default()).unwrap();
        let mut buf = Vec::new();
        write_feature_matrix(&mut buf, &corpus, approach, config).unwrap();
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(buf.as_slice());
        r.records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect())
            .collect()
    }

    #[test]
    fn amp_columns() {
        let m = matrix(Approach::Amp, &EvalConfig::default());
        assert_eq!(m[0].len(), 1 + 27 + 5);
        assert_eq!(m[0][1], "N");
        assert_eq!(&m[0][28..], &["O_MR", "O_HAC", "O_WC", "O_SP", "O_DA"]);
        assert_eq!(&m[1][28..], &["0", "1", "0", "0", "1"]);
        assert_eq!(m[1][1], "5");
    }

    #[test]
    fn dap_columns() {
        let m = matrix(Approach::Dap, &EvalConfig::default());
        assert_eq!(m[0].len(), 1 + 27 + 10 + 1);
        assert_eq!(m[0][28], "f_MR_0");
        assert_eq!(m[1].last().unwrap(), "1");
    }

    #[test]
    fn masked_export_drops_predicted_support() {
        let config = EvalConfig {
            mask: FeatureMask::full().without(FeatureGroup::PredictedSupport),
            ..EvalConfig::default()
        };
        let m = matrix(Approach::Amp, &config);
        assert_eq!(m[0].len(), 1 + 22 + 5);
        for name in [
            "MaxPSa",
            "MinPSa",
            "AvgPSv",
            "P_lowC_highPSv",
            "P_lowPSv_highC",
        ] {
            assert!(!m[0].iter().any(|h| h == name), "{name}");
        }
    }
}
