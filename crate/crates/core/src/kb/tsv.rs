use alloc::vec::Vec;

use super::KbError;

/// One data row of a TSV file with its 1-based line number.
pub(crate) struct Row<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

/// Splits `text` into tab-separated rows. Blank lines and `#` comments are
/// skipped; trailing whitespace is trimmed from every line and field.
pub(crate) fn rows<'a>(
    file: &str,
    text: &'a str,
    min_fields: usize,
    max_fields: usize,
) -> Result<Vec<Row<'a>>, KbError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim_start().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < min_fields || fields.len() > max_fields {
            return Err(KbError::parse(
                file,
                i + 1,
                alloc::format!(
                    "expected {} tab-separated fields, found {}",
                    if min_fields == max_fields {
                        alloc::format!("{min_fields}")
                    } else {
                        alloc::format!("{min_fields}-{max_fields}")
                    },
                    fields.len()
                ),
            ));
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Err(KbError::parse(
                file,
                i + 1,
                alloc::format!("field {} is empty", pos + 1),
            ));
        }
        out.push(Row { line: i + 1, fields });
    }
    Ok(out)
}
