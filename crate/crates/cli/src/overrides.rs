//! Dotted `--section.key value` flags, which clap cannot declare up front.

/// Splits dotted overrides out of `args`, returning the remaining arguments
/// and the `(key, value)` pairs in order. Both `--a.b v` and `--a.b=v` work.
pub fn extract(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut pairs = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (flag, None),
        };
        if !key.contains('.') || key.starts_with('.') || key.ends_with('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("--{key} needs a value"))?,
        };
        pairs.push((key.to_string(), value));
    }
    Ok((rest, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn splits_both_spellings() {
        let (rest, pairs) = extract(args("mf run catch --artifact.dot_bias_mm 0 --seed 3 --contact.flow_sum_px=80")).unwrap();
        assert_eq!(rest, args("mf run catch --seed 3"));
        assert_eq!(
            pairs,
            vec![
                ("artifact.dot_bias_mm".to_string(), "0".to_string()),
                ("contact.flow_sum_px".to_string(), "80".to_string())
            ]
        );
    }

    #[test]
    fn missing_value() {
        assert!(extract(args("mf run catch --artifact.dot_bias_mm")).is_err());
    }

    #[test]
    fn negative_numbers_are_values() {
        let (_, pairs) = extract(args("run x --artifact.range_bias -1")).unwrap();
        assert_eq!(pairs[0].1, "-1");
    }
}
