//! Flat `key=value` text: one pair per line, `#` comments, blank lines ignored.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    /// One-based source line.
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(i + 1, format!("expected key=value, got `{line}`")));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(i + 1, "empty key"));
        }
        entries.push(KvEntry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

/// Splits `a=1,b=2` into pairs. An empty string gives no pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("expected key=value, got `{part}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Parses `value` as a `T`, naming `key` in the error.
pub fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::usage(format!("bad value `{value}` for `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_keeps_line_numbers() {
        let text = "# header\n\nscenario = composite\nmodel=gbm:d=1\nmodel=glm\n";
        let kv = parse_kv(text).unwrap();
        assert_eq!(kv.len(), 3);
        assert_eq!(kv[0].line, 3);
        assert_eq!(kv[0].key, "scenario");
        assert_eq!(kv[0].value, "composite");
        assert_eq!(kv[1].value, "gbm:d=1");
    }

    #[test]
    fn missing_equals_reports_line() {
        match parse_kv("a=1\nbroken\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn pairs() {
        assert_eq!(
            parse_pairs("d=1, lr=0.1").unwrap(),
            vec![("d".into(), "1".into()), ("lr".into(), "0.1".into())]
        );
        assert!(parse_pairs("").unwrap().is_empty());
        assert!(parse_pairs("d").unwrap_err().is_usage());
        assert_eq!(parse_value::<usize>("d", "3").unwrap(), 3);
        assert!(parse_value::<usize>("d", "x").unwrap_err().is_usage());
    }
}
