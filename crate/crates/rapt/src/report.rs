//! Metrics report emitters: flat JSON and a fixed-header CSV row.

use rapt_core::MetricsReport;

/// Column order of [`metrics_csv_row`].
pub const METRICS_CSV_HEADER: &str = "micro_precision,micro_recall,micro_f1,\
macro_precision,macro_recall,macro_f1,hamming_loss,n_instances,n_labels";

/// One CSV row in [`METRICS_CSV_HEADER`] order.
pub fn metrics_csv_row(report: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        report.micro_precision,
        report.micro_recall,
        report.micro_f1,
        report.macro_precision,
        report.macro_recall,
        report.macro_f1,
        report.hamming_loss,
        report.n_instances,
        report.n_labels
    )
}

/// Flat JSON object with the nine report fields.
pub fn metrics_json(report: &MetricsReport) -> String {
    serde_json::to_string_pretty(report).expect("metrics serialization")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsReport {
        MetricsReport {
            micro_precision: 0.5,
            micro_recall: 0.25,
            micro_f1: 1.0 / 3.0,
            macro_precision: 0.5,
            macro_recall: 0.25,
            macro_f1: 0.3,
            hamming_loss: 0.125,
            n_instances: 8,
            n_labels: 4,
        }
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let row = metrics_csv_row(&sample());
        assert_eq!(row.split(',').count(), METRICS_CSV_HEADER.split(',').count());
        assert!(row.starts_with("0.5,0.25,"));
        assert!(row.ends_with(",8,4"));
    }

    #[test]
    fn json_is_flat_with_nine_fields() {
        let value: serde_json::Value = serde_json::from_str(&metrics_json(&sample())).unwrap();
        let object = value.as_object().unwrap();
        assert_eq!(object.len(), 9);
        assert_eq!(object["n_labels"], 4);
        assert!(object.values().all(|v| v.is_number()));
    }
}
