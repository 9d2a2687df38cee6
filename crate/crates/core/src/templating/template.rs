use super::lexer::{render_tokens, tokenize_sql, Token};

/// Splits a URL stem into itself and its verb: the final path segment,
/// lower-cased, with any extension removed.
pub fn extract_stem(uri_stem: &str) -> (String, String) {
    let segment = uri_stem.rsplit('/').next().unwrap_or("");
    let base = match segment.rfind('.') {
        Some(pos) => &segment[..pos],
        None => segment,
    };
    (uri_stem.to_string(), base.to_lowercase())
}

/// The normalized token list behind [`sql_template`].
pub fn template_tokens(statement: &str) -> Vec<Token> {
    tokenize_sql(statement)
        .into_iter()
        .map(|tok| match tok {
            Token::Number(_) => Token::Placeholder,
            Token::Ident(name) => Token::Ident(name.to_lowercase()),
            other => other,
        })
        .collect()
}

/// Fingerprint of a statement: numeric literals become `#`, identifiers
/// are lower-cased, keywords upper-cased and tokens joined by single
/// spaces. String contents and digits inside identifiers are kept.
pub fn sql_template(statement: &str) -> String {
    render_tokens(&template_tokens(statement))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verbs() {
        assert_eq!(extract_stem("/en/tools/x_sql.asp").1, "x_sql");
        assert_eq!(extract_stem("/en/get/GetJpeg.aspx").1, "getjpeg");
        assert_eq!(extract_stem("/").1, "");
        assert_eq!(extract_stem("").1, "");
        assert_eq!(extract_stem("/proj/a.b.htm").1, "a.b");
        assert_eq!(extract_stem("/en/tools/").1, "");
        assert_eq!(extract_stem("/en/x_sql.asp").0, "/en/x_sql.asp");
    }

    #[test]
    fn htm_range_query() {
        assert_eq!(
            sql_template(
                "select count(*) from photoprimary where (htmID >= 12 and htmID <= 9000)"
            ),
            "SELECT COUNT ( * ) FROM photoprimary WHERE ( htmid >= # AND htmid <= # )"
        );
    }

    #[test]
    fn identifier_digits_survive() {
        let t = sql_template("SELECT LF.BESTOBJID FROM MYTABLE_61 AS LF");
        assert_eq!(t, "SELECT lf.bestobjid FROM mytable_61 AS lf");
    }

    #[test]
    fn strings_are_not_masked() {
        assert_eq!(
            sql_template("select * from t where name = 'NGC 1234' and x=0x1F and y = -2.5e3"),
            "SELECT * FROM t WHERE name = 'NGC 1234' AND x = # AND y = - #"
        );
    }

    #[test]
    fn idempotent_on_examples() {
        for s in [
            "select count(*) from photoprimary where (htmID >= 12 and htmID <= 9000)",
            "SELECT TOP 10 ph.ra,ph.dec, str(ph.g - ph.r,11 ? ) as color FROM #x x",
            "select 'it''s' , [Dec] from \"T\" where a=1.",
            "",
        ] {
            let once = sql_template(s);
            assert_eq!(sql_template(&once), once);
        }
    }
}
