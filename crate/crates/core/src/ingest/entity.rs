use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::porter;
use super::stopwords::StopWords;
use super::tweet::Tweet;

/// The four kinds of protomeme entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Hashtag,
    Mention,
    Url,
    Phrase,
}

/// A protomeme grouping key. Identity is the `(kind, key)` pair, so the
/// hashtag `#x` and the phrase `x` are different entities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub key: Arc<str>,
}

impl Entity {
    pub fn new(kind: EntityKind, key: impl Into<Arc<str>>) -> Self {
        Self {
            kind,
            key: key.into(),
        }
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EntityKind::Phrase => write!(f, "phrase:{}", self.key),
            _ => f.write_str(&self.key),
        }
    }
}

/// A tweet reduced to what the clusterers need: its entities, its content
/// term counts and the users involved in its diffusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzedTweet {
    pub id: Arc<str>,
    pub timestamp: i64,
    pub author: Arc<str>,
    pub entities: Vec<Entity>,
    /// Stemmed phrase tokens and hashtag keys with their counts, sorted by term.
    pub terms: Vec<(Arc<str>, u32)>,
    /// Mentioned users, lowercase and without the `@`.
    pub mentions: Vec<Arc<str>>,
    pub retweet_of: Option<Arc<str>>,
}

impl AnalyzedTweet {
    pub fn has_entity(&self, entity: &Entity) -> bool {
        self.entities.contains(entity)
    }

    /// Authors, mentioned users and retweeted authors, lowercased, sorted
    /// and deduplicated.
    pub fn diffusion_users(&self) -> Vec<Arc<str>> {
        let mut users: Vec<Arc<str>> = std::iter::once(&self.author)
            .chain(self.mentions.iter())
            .chain(self.retweet_of.iter())
            .map(|u| Arc::from(u.to_lowercase()))
            .collect();
        users.sort();
        users.dedup();
        users
    }
}

static URL_WITH_SCHEME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:https?://|www\.)\S+$").unwrap());
static URL_SCHEMELESS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[a-z0-9](?:[a-z0-9-]*[a-z0-9])?(?:\.[a-z0-9](?:[a-z0-9-]*[a-z0-9])?)*\.[a-z]{2,}/\S*$")
        .unwrap()
});
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[#@][\w]+").unwrap());

const LEADING_PUNCT: &[char] = &['(', '[', '{', '"', '\'', '<', '«', '“', '‘'];
const TRAILING_PUNCT: &[char] = &[
    ')', ']', '}', '"', '\'', '>', '.', ',', ';', ':', '!', '?', '»', '”', '’',
];

/// Turns tweets into entities and content terms.
///
/// Hashtags listed in the blind set are erased from the text before anything
/// else happens: they yield no entity and no content term.
#[derive(Debug, Clone, Default)]
pub struct Extractor {
    stopwords: StopWords,
    blind: HashSet<String>,
}

impl Extractor {
    pub fn new(stopwords: StopWords) -> Self {
        Self {
            stopwords,
            blind: HashSet::new(),
        }
    }

    /// English stopwords, no blinding.
    pub fn english() -> Self {
        Self::new(StopWords::english())
    }

    /// Hashtags to hide from the clusterers. The leading `#` is optional and
    /// matching is case-insensitive.
    pub fn with_blind_hashtags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.blind.extend(tags.into_iter().map(|t| normalize_hashtag(t.as_ref())));
        self
    }

    pub fn blinded(&self) -> &HashSet<String> {
        &self.blind
    }

    pub fn stopwords(&self) -> &StopWords {
        &self.stopwords
    }

    /// Entities of `tweet`: hashtags, then mentions, then URLs (each in text
    /// order, deduplicated), then at most one phrase.
    pub fn extract_entities(&self, tweet: &Tweet) -> Vec<Entity> {
        self.scan(&tweet.text).entities()
    }

    pub fn analyze(&self, tweet: &Tweet) -> AnalyzedTweet {
        let scan = self.scan(&tweet.text);
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for term in scan.phrase.iter().chain(scan.hashtags.iter()) {
            *counts.entry(term.as_str()).or_default() += 1;
        }
        let terms = counts.into_iter().map(|(t, c)| (Arc::from(t), c)).collect();
        let mut mentions: Vec<Arc<str>> = scan
            .mentions
            .iter()
            .map(|m| Arc::from(m.trim_start_matches('@')))
            .collect();
        mentions.dedup();
        AnalyzedTweet {
            id: Arc::from(tweet.id.as_str()),
            timestamp: tweet.timestamp,
            author: Arc::from(tweet.author_id.as_str()),
            entities: scan.entities(),
            terms,
            mentions,
            retweet_of: tweet.retweet_of_author.as_deref().map(Arc::from),
        }
    }

    fn scan(&self, text: &str) -> Scan {
        let mut scan = Scan::default();
        let mut residual = String::with_capacity(text.len());
        for token in text.split_whitespace() {
            let core = token
                .trim_start_matches(LEADING_PUNCT)
                .trim_end_matches(TRAILING_PUNCT);
            if URL_WITH_SCHEME.is_match(core) || URL_SCHEMELESS.is_match(core) {
                scan.urls.push(normalize_url(core));
                residual.push(' ');
            } else {
                residual.push_str(token);
                residual.push(' ');
            }
        }

        let mut rest = String::with_capacity(residual.len());
        let mut last = 0;
        for m in TAG.find_iter(&residual) {
            let preceded_by_word = residual[..m.start()]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric() || c == '_');
            if preceded_by_word {
                continue;
            }
            rest.push_str(&residual[last..m.start()]);
            rest.push(' ');
            last = m.end();
            let tag = m.as_str().to_lowercase();
            if tag.starts_with('#') {
                if !self.blind.contains(&tag) {
                    scan.hashtags.push(tag);
                }
            } else {
                scan.mentions.push(tag);
            }
        }
        rest.push_str(&residual[last..]);

        scan.phrase = self.phrase_tokens(&rest);
        scan
    }

    fn phrase_tokens(&self, text: &str) -> Vec<String> {
        let lowered = text.to_lowercase().replace('’', "'");
        lowered
            .split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .map(|t| t.trim_matches('\''))
            .filter(|t| !t.is_empty() && !self.stopwords.contains(t))
            .map(|t| t.replace('\'', ""))
            .filter(|t| !t.is_empty() && !self.stopwords.contains(t))
            .map(|t| porter::stem(&t))
            .collect()
    }
}

#[derive(Default)]
struct Scan {
    hashtags: Vec<String>,
    mentions: Vec<String>,
    urls: Vec<String>,
    phrase: Vec<String>,
}

impl Scan {
    fn entities(&self) -> Vec<Entity> {
        let mut out: Vec<Entity> = Vec::new();
        let mut push = |kind, key: &str| {
            let e = Entity::new(kind, key);
            if !out.contains(&e) {
                out.push(e);
            }
        };
        for h in &self.hashtags {
            push(EntityKind::Hashtag, h);
        }
        for m in &self.mentions {
            push(EntityKind::Mention, m);
        }
        for u in &self.urls {
            push(EntityKind::Url, u);
        }
        if !self.phrase.is_empty() {
            push(EntityKind::Phrase, &self.phrase.join(" "));
        }
        out
    }
}

/// Free-function form of [`Extractor::extract_entities`].
pub fn extract_entities(tweet: &Tweet, stopwords: &StopWords) -> Vec<Entity> {
    Extractor::new(stopwords.clone()).extract_entities(tweet)
}

/// Lowercase `#tag` form of a hashtag given with or without its `#`.
pub fn normalize_hashtag(tag: &str) -> String {
    let tag = tag.trim();
    let body = tag.strip_prefix('#').unwrap_or(tag);
    format!("#{}", body.to_lowercase())
}

/// Lowercases scheme and host; the path keeps its case.
fn normalize_url(url: &str) -> String {
    let (scheme, rest) = match url.find("://") {
        Some(i) => url.split_at(i + 3),
        None => ("", url),
    };
    let (host, path) = match rest.find('/') {
        Some(i) => rest.split_at(i),
        None => (rest, ""),
    };
    format!("{}{}{}", scheme.to_lowercase(), host.to_lowercase(), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(text: &str) -> Tweet {
        Tweet {
            id: "1".into(),
            timestamp: 0,
            author_id: "u1".into(),
            text: text.into(),
            retweet_of_author: None,
        }
    }

    const OBAMACARE: &str = "Tell your friends: #Obamacare is helping young people afford health \
                             insurance. (via @OFATruthTeam) pic.twitter.com/s9QHilsSjO";

    #[test]
    fn worked_example_yields_four_entities() {
        let ents = Extractor::english().extract_entities(&tweet(OBAMACARE));
        assert_eq!(
            ents,
            vec![
                Entity::new(EntityKind::Hashtag, "#obamacare"),
                Entity::new(EntityKind::Mention, "@ofatruthteam"),
                Entity::new(EntityKind::Url, "pic.twitter.com/s9QHilsSjO"),
                // Porter stems of "tell friends helping young people afford health insurance",
                // frozen from an independent reference stemmer.
                Entity::new(EntityKind::Phrase, "tell friend help young peopl afford health insur"),
            ]
        );
    }

    #[test]
    fn only_tags_means_no_phrase() {
        let ents = Extractor::english().extract_entities(&tweet("#a #b"));
        assert_eq!(
            ents,
            vec![
                Entity::new(EntityKind::Hashtag, "#a"),
                Entity::new(EntityKind::Hashtag, "#b"),
            ]
        );
    }

    #[test]
    fn empty_text_has_no_entities() {
        assert!(Extractor::english().extract_entities(&tweet("")).is_empty());
        assert!(Extractor::english().extract_entities(&tweet("the of and")).is_empty());
    }

    #[test]
    fn urls_keep_path_case_and_lowercase_host() {
        let ents = Extractor::english().extract_entities(&tweet("see HTTP://Example.COM/AbC, www.Foo.org/X"));
        let urls: Vec<_> = ents.iter().filter(|e| e.kind == EntityKind::Url).collect();
        assert_eq!(urls[0].key.as_ref(), "http://example.com/AbC");
        assert_eq!(urls[1].key.as_ref(), "www.foo.org/X");
    }

    #[test]
    fn email_is_not_a_mention() {
        let ents = Extractor::english().extract_entities(&tweet("mail bob@example now"));
        assert!(ents.iter().all(|e| e.kind == EntityKind::Phrase));
    }

    #[test]
    fn duplicate_tags_collapse() {
        let a = Extractor::english().analyze(&tweet("#x word #X"));
        assert_eq!(a.entities.iter().filter(|e| e.kind == EntityKind::Hashtag).count(), 1);
        assert_eq!(a.terms, vec![(Arc::from("#x"), 2), (Arc::from("word"), 1)]);
    }

    #[test]
    fn blinded_hashtags_vanish_everywhere() {
        let ex = Extractor::english().with_blind_hashtags(["Obamacare"]);
        let a = ex.analyze(&tweet(OBAMACARE));
        assert!(a.entities.iter().all(|e| !e.key.contains("obamacare")));
        assert!(a.terms.iter().all(|(t, _)| !t.contains("obamacare")));
    }

    #[test]
    fn diffusion_users_union() {
        let mut t = tweet("hey @U2");
        t.retweet_of_author = Some("u3".into());
        let a = Extractor::english().analyze(&t);
        let users = a.diffusion_users();
        assert_eq!(users, vec![Arc::from("u1"), Arc::from("u2"), Arc::from("u3")]);
    }

    #[test]
    fn apostrophes_and_stopwords() {
        let a = Extractor::english().analyze(&tweet("Don't stop believing"));
        let terms: Vec<&str> = a.terms.iter().map(|(t, _)| t.as_ref()).collect();
        assert_eq!(terms, vec!["believ", "stop"]);
    }
}
