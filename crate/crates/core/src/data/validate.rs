use super::{ResponseBundle, ValidationReport, Violation};

/// Checks every [`ResponseBundle`] invariant. Violations are data, not errors:
/// an empty report means the bundle is usable.
pub fn validate_bundle(bundle: &ResponseBundle) -> ValidationReport {
    let mut out = Vec::new();
    let m = bundle.m();

    if bundle.question_id.is_empty() {
        out.push(Violation::new("question_id", "must be nonempty"));
    }
    if bundle.references.is_empty() {
        out.push(Violation::new("references", "need at least 1 reference"));
    }
    if m < 2 {
        out.push(Violation::new(
            "responses",
            format!("need at least 2 responses, found {m}"),
        ));
    }

    if let Some(rows) = &bundle.embeddings {
        check_embeddings(rows, m, &mut out);
    }
    if let Some(logits) = &bundle.nli_logits {
        check_nli_logits(logits, m, &mut out);
    }
    if let Some(lp) = &bundle.seq_logprobs {
        if lp.logprobs.len() != m {
            out.push(Violation::new(
                "seq_logprobs",
                format!("expected {m} logprobs, found {}", lp.logprobs.len()),
            ));
        }
        if lp.token_counts.len() != m {
            out.push(Violation::new(
                "seq_logprobs",
                format!("expected {m} token counts, found {}", lp.token_counts.len()),
            ));
        }
        if let Some(i) = lp.logprobs.iter().position(|v| !v.is_finite()) {
            out.push(Violation::new("seq_logprobs", format!("non-finite at {i}")));
        } else if let Some(i) = lp.logprobs.iter().position(|&v| v > 0.0) {
            out.push(Violation::new(
                "seq_logprobs",
                format!("log-probability at {i} is positive"),
            ));
        }
        if let Some(i) = lp.token_counts.iter().position(|&c| c == 0) {
            out.push(Violation::new(
                "seq_logprobs",
                format!("token count at {i} must be at least 1"),
            ));
        }
    }
    if let Some(scores) = &bundle.external_scores {
        for (name, values) in scores {
            let field = format!("external_scores[{name}]");
            if values.len() != m {
                out.push(Violation::new(
                    field.clone(),
                    format!("expected {m} values, found {}", values.len()),
                ));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                out.push(Violation::new(field, format!("non-finite at {i}")));
            }
        }
    }

    ValidationReport { violations: out }
}

fn check_embeddings(rows: &[Vec<f64>], m: usize, out: &mut Vec<Violation>) {
    if rows.len() != m {
        out.push(Violation::new(
            "embeddings",
            format!("expected {m} rows, found {}", rows.len()),
        ));
    }
    let Some(d) = rows.first().map(|r| r.len()) else {
        return;
    };
    if d == 0 {
        out.push(Violation::new("embeddings", "width must be at least 1"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        out.push(Violation::new(
            "embeddings",
            format!("row {i} has width {}, expected {d}", r.len()),
        ));
    }
    let mut bad = rows.iter().enumerate().flat_map(|(i, r)| {
        r.iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(move |(k, _)| (i, k))
    });
    if let Some((i, k)) = bad.next() {
        let more = bad.count();
        let reason = if more == 0 {
            format!("non-finite at ({i},{k})")
        } else {
            format!("non-finite at ({i},{k}) (+{more} more)")
        };
        out.push(Violation::new("embeddings", reason));
    }
}

fn check_nli_logits(logits: &[Vec<Vec<Vec<f64>>>], m: usize, out: &mut Vec<Violation>) {
    if logits.len() != m {
        out.push(Violation::new(
            "nli_logits",
            format!("first axis must be {m}, found {}", logits.len()),
        ));
    }
    let (mut second, mut third, mut last) = (false, false, false);
    let mut non_finite = None;
    for (i, row) in logits.iter().enumerate() {
        second |= row.len() != m;
        for (j, pair) in row.iter().enumerate() {
            third |= pair.len() != 2;
            for (dir, classes) in pair.iter().enumerate() {
                last |= classes.len() != 3;
                if non_finite.is_none() {
                    if let Some(c) = classes.iter().position(|v| !v.is_finite()) {
                        non_finite = Some((i, j, dir, c));
                    }
                }
            }
        }
    }
    if second {
        out.push(Violation::new(
            "nli_logits",
            format!("second axis must be {m}"),
        ));
    }
    if third {
        out.push(Violation::new("nli_logits", "direction axis must be 2"));
    }
    if last {
        out.push(Violation::new("nli_logits", "last axis must be 3"));
    }
    if let Some((i, j, dir, c)) = non_finite {
        out.push(Violation::new(
            "nli_logits",
            format!("non-finite at ({i},{j},{dir},{c})"),
        ));
    }
}
