//! User-agent categorization by ordered, case-insensitive substring rules.

use std::fmt::Write as _;

use super::record::{AgentCategory, AgentInfo};
use super::IngestError;

/// One `pattern -> canonical name` rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marker {
    pattern: String,
    name: String,
}

impl Marker {
    pub fn new(pattern: &str, name: &str) -> Self {
        Marker {
            pattern: pattern.to_lowercase(),
            name: name.to_string(),
        }
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Ordered marker lists, checked admin, spider, program, browser.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentRules {
    pub admin: Vec<Marker>,
    pub spider: Vec<Marker>,
    pub program: Vec<Marker>,
    pub browser: Vec<Marker>,
}

const DEFAULT_RULES: &str = "\
# category\tpattern\tcanonical_name
admin\tBigBrother\tBigBrother
admin\tVO-Registry\tVO-Registry
admin\tVORegistry\tVO-Registry
spider\tGooglebot\tGooglebot
spider\tSlurp\tSlurp
spider\tmsnbot\tmsnbot
spider\tbingbot\tbingbot
spider\tBaiduspider\tBaiduspider
spider\tYandex\tYandex
spider\tia_archiver\tAlexa
spider\tTeoma\tAsk
spider\tcrawler\tCrawler
spider\tspider\tSpider
spider\tbot\tBot
program\tlibwww-perl\tPerl
program\tLWP\tPerl
program\tperl\tPerl
program\tpython\tPython
program\tWget\tWget
program\tcurl\tcurl
program\tJava\tJava
program\tIDL\tIDL
program\tHTTrack\tHTTrack
browser\tMSIE\tMSIE
browser\tFirefox\tFirefox
browser\tChrome\tChrome
browser\tSafari\tSafari
browser\tOpera\tOpera
browser\tKonqueror\tKonqueror
browser\tNetscape\tNetscape
browser\tMozilla\tMozilla
";

impl AgentRules {
    /// Built-in rule set used when no agent configuration file is given.
    pub fn default_rules() -> Self {
        Self::parse(DEFAULT_RULES).expect("built-in agent rules parse")
    }

    /// Parses `category \t pattern \t canonical_name` lines. Blank lines
    /// and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut rules = AgentRules::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields[1].is_empty() || fields[2].is_empty() {
                return Err(IngestError::Config {
                    line: line_no,
                    reason: "expected `category\\tpattern\\tcanonical_name`".into(),
                });
            }
            let marker = Marker::new(fields[1], fields[2]);
            match AgentCategory::parse(fields[0]) {
                Some(AgentCategory::Admin) => rules.admin.push(marker),
                Some(AgentCategory::Spider) => rules.spider.push(marker),
                Some(AgentCategory::Program) => rules.program.push(marker),
                Some(AgentCategory::Browser) => rules.browser.push(marker),
                _ => {
                    return Err(IngestError::Config {
                        line: line_no,
                        reason: format!("unknown agent category `{}`", fields[0]),
                    })
                }
            }
        }
        Ok(rules)
    }

    /// Renders the rules back to the configuration format.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        for (cat, list) in [
            (AgentCategory::Admin, &self.admin),
            (AgentCategory::Spider, &self.spider),
            (AgentCategory::Program, &self.program),
            (AgentCategory::Browser, &self.browser),
        ] {
            for m in list {
                let _ = writeln!(out, "{}\t{}\t{}", cat, m.pattern, m.name);
            }
        }
        out
    }

    /// Number of distinct canonical names per category, in the order
    /// admin, spider, program, browser.
    pub fn group_counts(&self) -> [usize; 4] {
        let distinct = |list: &[Marker]| {
            let mut names: Vec<&str> = list.iter().map(|m| m.name.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            names.len()
        };
        [
            distinct(&self.admin),
            distinct(&self.spider),
            distinct(&self.program),
            distinct(&self.browser),
        ]
    }
}

/// Categorizes a raw agent string. The first matching rule wins, checking
/// admin names, then spider, program and browser markers.
pub fn classify_agent(raw: &str, rules: &AgentRules) -> AgentInfo {
    let lowered = raw.to_lowercase();
    let groups = [
        (AgentCategory::Admin, &rules.admin),
        (AgentCategory::Spider, &rules.spider),
        (AgentCategory::Program, &rules.program),
        (AgentCategory::Browser, &rules.browser),
    ];
    for (category, markers) in groups {
        if let Some(m) = markers.iter().find(|m| lowered.contains(&m.pattern)) {
            return AgentInfo {
                raw: raw.to_string(),
                name: m.name.clone(),
                category,
            };
        }
    }
    AgentInfo {
        raw: raw.to_string(),
        name: "unknown".to_string(),
        category: AgentCategory::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn googlebot_masquerading_as_mozilla_is_a_spider() {
        let info = classify_agent(
            "Mozilla/5.0 (compatible; Googlebot/2.1)",
            &AgentRules::default_rules(),
        );
        assert_eq!(info.name, "Googlebot");
        assert_eq!(info.category, AgentCategory::Spider);
    }

    #[test]
    fn admin_names_take_precedence() {
        let info = classify_agent("BigBrother Network Monitor", &AgentRules::default_rules());
        assert_eq!(info.name, "BigBrother");
        assert_eq!(info.category, AgentCategory::Admin);

        // without the admin rule the same string is unknown
        let mut rules = AgentRules::default_rules();
        rules.admin.clear();
        assert_eq!(
            classify_agent("BigBrother Network Monitor", &rules).category,
            AgentCategory::Unknown
        );
    }

    #[test]
    fn perl_library_is_a_program() {
        let info = classify_agent("libwww-perl/5.8", &AgentRules::default_rules());
        assert_eq!(info.name, "Perl");
        assert_eq!(info.category, AgentCategory::Program);
    }

    #[test]
    fn unmatched_and_empty_agents_are_unknown() {
        let rules = AgentRules::default_rules();
        for raw in ["", "zzz", "-"] {
            let info = classify_agent(raw, &rules);
            assert_eq!(info.name, "unknown");
            assert_eq!(info.category, AgentCategory::Unknown);
        }
        assert_eq!(
            classify_agent("Mozilla/4.0 (compatible; MSIE 6.0)", &rules).name,
            "MSIE"
        );
    }

    #[test]
    fn config_round_trip_and_errors() {
        let rules = AgentRules::default_rules();
        assert_eq!(AgentRules::parse(&rules.to_config()).unwrap(), rules);
        assert!(matches!(
            AgentRules::parse("robot\tx\ty"),
            Err(IngestError::Config { line: 1, .. })
        ));
        assert!(AgentRules::parse("spider\tx").is_err());
    }
}
