//! Fingerprints: URL command stems, SQL templates and the simplified token
//! streams derived from templates.

mod corpus;
mod lexer;
mod simplify;
mod template;

pub use corpus::{build_corpora, CommandStem, Corpora, SqlTemplate};
pub use lexer::{is_keyword, render_tokens, tokenize_sql, Token, KEYWORDS};
pub use simplify::{base_name, simplify_template, TokenStream, MERGED_KEYWORDS, PLACEHOLDERS};
pub use template::{extract_stem, sql_template, template_tokens};
