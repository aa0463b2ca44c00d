//! Built-in English word tables.
//!
//! Closed-class words (determiners, prepositions, pronouns), a small verb
//! inflection table and preposition collocations. The same tables drive the
//! error-marker detectors, the injection rules and the synthetic corpus, so
//! a clean synthetic text never trips a detector.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// One lexical verb with its inflections and the prepositions it takes.
#[derive(Debug, Clone, Copy)]
pub struct Verb {
    pub base: &'static str,
    pub third: &'static str,
    pub past: &'static str,
    pub participle: &'static str,
    pub ing: &'static str,
    pub preps: &'static [&'static str],
}

const fn v(
    base: &'static str,
    third: &'static str,
    past: &'static str,
    participle: &'static str,
    ing: &'static str,
    preps: &'static [&'static str],
) -> Verb {
    Verb {
        base,
        third,
        past,
        participle,
        ing,
        preps,
    }
}

/// Intransitive motion/location verbs: `SUBJ VERB PREP the PLACE`.
pub const PLACE_VERBS: &[Verb] = &[
    v("go", "goes", "went", "gone", "going", &["to"]),
    v("walk", "walks", "walked", "walked", "walking", &["to"]),
    v("drive", "drives", "drove", "driven", "driving", &["to"]),
    v("ride", "rides", "rode", "ridden", "riding", &["to"]),
    v("travel", "travels", "traveled", "traveled", "traveling", &["to"]),
    v("return", "returns", "returned", "returned", "returning", &["to"]),
    v("arrive", "arrives", "arrived", "arrived", "arriving", &["at"]),
    v("stay", "stays", "stayed", "stayed", "staying", &["at"]),
    v("work", "works", "worked", "worked", "working", &["at"]),
    v("swim", "swims", "swam", "swum", "swimming", &["in"]),
];

/// Verbs taking a prepositional pronoun object: `and VERB PREP OBJ`.
pub const SOCIAL_VERBS: &[Verb] = &[
    v("talk", "talks", "talked", "talked", "talking", &["with", "to", "about"]),
    v("listen", "listens", "listened", "listened", "listening", &["to"]),
    v("look", "looks", "looked", "looked", "looking", &["at", "for"]),
    v("wait", "waits", "waited", "waited", "waiting", &["for"]),
    v("speak", "speaks", "spoke", "spoken", "speaking", &["with", "to"]),
    v("play", "plays", "played", "played", "playing", &["with"]),
    v("agree", "agrees", "agreed", "agreed", "agreeing", &["with"]),
    v("laugh", "laughs", "laughed", "laughed", "laughing", &["at", "with"]),
];

/// Transitive verbs: `SUBJ VERB the OBJECT for OBJ`.
pub const OBJECT_VERBS: &[Verb] = &[
    v("cook", "cooks", "cooked", "cooked", "cooking", &[]),
    v("bake", "bakes", "baked", "baked", "baking", &[]),
    v("buy", "buys", "bought", "bought", "buying", &[]),
    v("write", "writes", "wrote", "written", "writing", &[]),
    v("bring", "brings", "brought", "brought", "bringing", &[]),
    v("make", "makes", "made", "made", "making", &[]),
    v("draw", "draws", "drew", "drawn", "drawing", &[]),
    v("choose", "chooses", "chose", "chosen", "choosing", &[]),
];

pub const PLACES: &[&str] = &[
    "park", "school", "station", "market", "library", "office", "beach", "museum", "garden", "hospital", "cinema",
    "stadium",
];

/// Object nouns and the prepositions that may follow them.
pub const OBJECTS: &[(&str, &[&str])] = &[
    ("dinner", &["for"]),
    ("cake", &["for"]),
    ("letter", &["for", "to"]),
    ("gift", &["for"]),
    ("picture", &["for", "of"]),
    ("meal", &["for"]),
    ("card", &["for"]),
    ("book", &["for", "about"]),
];

/// Topic nouns used after adjective collocations.
pub const TOPICS: &[&str] = &[
    "news", "results", "game", "project", "homework", "music", "trip", "exam", "weather",
];

pub const SINGULAR_SUBJECTS: &[&str] = &[
    "teacher", "student", "doctor", "girl", "boy", "neighbor", "friend", "farmer",
];

pub const PLURAL_SUBJECTS: &[&str] = &[
    "teachers",
    "students",
    "doctors",
    "girls",
    "boys",
    "neighbors",
    "friends",
    "farmers",
    "children",
];

/// Adjectives and the prepositions they license.
pub const ADJECTIVES: &[(&str, &[&str])] = &[
    ("happy", &["about", "with"]),
    ("busy", &["with"]),
    ("interested", &["in"]),
    ("afraid", &["of"]),
    ("proud", &["of"]),
    ("good", &["at"]),
    ("tired", &["of"]),
    ("excited", &["about"]),
    ("worried", &["about"]),
];

pub const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "every", "each", "some", "my", "your", "his", "its", "our",
    "their",
];

pub const PREPOSITIONS: &[&str] = &[
    "to", "at", "for", "in", "on", "with", "about", "from", "of", "by", "into", "under",
];

/// Prepositions used as substitution candidates.
pub const PREP_CONFUSIONS: &[&str] = &["to", "at", "for", "in", "on", "with", "about", "from", "of", "by"];

pub const CONJUNCTIONS: &[&str] = &["and", "but", "because", "so"];

pub const FILLERS: &[&str] = &["um", "uh", "like", "you know"];

/// Grammatical person/number of a subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Person {
    FirstSingular,
    ThirdSingular,
    /// Plural or second person: takes the base form.
    Plural,
}

/// Subject/object case pairs: (subject, object, person).
pub const PRONOUNS: &[(&str, &str, Person)] = &[
    ("i", "me", Person::FirstSingular),
    ("he", "him", Person::ThirdSingular),
    ("she", "her", Person::ThirdSingular),
    ("we", "us", Person::Plural),
    ("they", "them", Person::Plural),
];

/// Pronouns whose case does not change; subjects only for agreement.
pub const CASELESS_PRONOUNS: &[(&str, Person)] = &[("you", Person::Plural), ("it", Person::ThirdSingular)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFrame {
    Past,
    Present,
}

/// Words that fix the time frame of what follows.
pub const TIME_MARKERS: &[(&str, TimeFrame)] = &[
    ("yesterday", TimeFrame::Past),
    ("ago", TimeFrame::Past),
    ("last", TimeFrame::Past),
    ("earlier", TimeFrame::Past),
    ("every", TimeFrame::Present),
    ("usually", TimeFrame::Present),
    ("often", TimeFrame::Present),
    ("always", TimeFrame::Present),
    ("sometimes", TimeFrame::Present),
    ("weekends", TimeFrame::Present),
];

/// Sentence-opening time adverbials, always followed by a comma in clean text.
pub const INTRO_PHRASES: &[(&[&str], TimeFrame)] = &[
    (&["every", "day"], TimeFrame::Present),
    (&["every", "evening"], TimeFrame::Present),
    (&["every", "morning"], TimeFrame::Present),
    (&["usually"], TimeFrame::Present),
    (&["often"], TimeFrame::Present),
    (&["sometimes"], TimeFrame::Present),
    (&["on", "weekends"], TimeFrame::Present),
    (&["yesterday"], TimeFrame::Past),
    (&["last", "week"], TimeFrame::Past),
    (&["last", "summer"], TimeFrame::Past),
    (&["two", "days", "ago"], TimeFrame::Past),
    (&["earlier", "today"], TimeFrame::Past),
];

const OTHER_WORDS: &[&str] = &[
    "day", "evening", "morning", "week", "summer", "two", "days", "today", "also",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerbForm {
    Base,
    Third,
    Past,
    /// Only assigned when the participle differs from the simple past.
    Participle,
    Ing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aux {
    Be,
    Have,
    Do,
}

/// Auxiliary forms: (word, kind, form, person constraint). Person `None`
/// means the form agrees with any subject.
pub const AUX_FORMS: &[(&str, Aux, AuxTense, Option<AuxAgreement>)] = &[
    ("am", Aux::Be, AuxTense::Present, Some(AuxAgreement::First)),
    ("is", Aux::Be, AuxTense::Present, Some(AuxAgreement::Third)),
    ("are", Aux::Be, AuxTense::Present, Some(AuxAgreement::Plural)),
    ("was", Aux::Be, AuxTense::Past, Some(AuxAgreement::Singular)),
    ("were", Aux::Be, AuxTense::Past, Some(AuxAgreement::Plural)),
    ("has", Aux::Have, AuxTense::Present, Some(AuxAgreement::Third)),
    ("have", Aux::Have, AuxTense::Present, Some(AuxAgreement::NonThird)),
    ("had", Aux::Have, AuxTense::Past, None),
    ("does", Aux::Do, AuxTense::Present, Some(AuxAgreement::Third)),
    ("do", Aux::Do, AuxTense::Present, Some(AuxAgreement::NonThird)),
    ("did", Aux::Do, AuxTense::Past, None),
    ("be", Aux::Be, AuxTense::Untensed, None),
    ("been", Aux::Be, AuxTense::Untensed, None),
    ("being", Aux::Be, AuxTense::Untensed, None),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxTense {
    Present,
    Past,
    Untensed,
}

/// Which subjects an auxiliary form agrees with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxAgreement {
    /// "am"
    First,
    /// "is", "has", "does"
    Third,
    /// "are", "were"
    Plural,
    /// "was": first or third singular
    Singular,
    /// "have", "do"
    NonThird,
}

impl AuxAgreement {
    pub fn agrees(self, person: Person) -> bool {
        match self {
            AuxAgreement::First => person == Person::FirstSingular,
            AuxAgreement::Third => person == Person::ThirdSingular,
            AuxAgreement::Plural => person == Person::Plural,
            AuxAgreement::Singular => person != Person::Plural,
            AuxAgreement::NonThird => person != Person::ThirdSingular,
        }
    }
}

/// Part-of-speech class assigned by dictionary lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Det,
    Prep,
    SubjPron(Person),
    ObjPron,
    /// "you" and "it": usable as subject, never flagged for case.
    Pron(Person),
    Verb {
        verb: VerbId,
        form: VerbForm,
    },
    Aux {
        index: usize,
    },
    Noun {
        plural: bool,
    },
    Adj,
    Conj,
    Time,
    Filler,
    Unknown,
}

/// Index into [`Lexicon::verbs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VerbId(pub usize);

/// Word lookup tables built once and shared by reference.
#[derive(Debug, Clone)]
pub struct Lexicon {
    verbs: Vec<Verb>,
    tags: BTreeMap<&'static str, Tag>,
    /// Prepositions licensed after a content word.
    licensed: BTreeMap<&'static str, &'static [&'static str]>,
    by_len: BTreeMap<usize, Vec<&'static str>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::new()
    }
}

impl Lexicon {
    pub fn new() -> Self {
        let mut tags: BTreeMap<&'static str, Tag> = BTreeMap::new();
        let mut licensed: BTreeMap<&'static str, &'static [&'static str]> = BTreeMap::new();

        for w in DETERMINERS {
            tags.insert(w, Tag::Det);
        }
        for w in PREPOSITIONS {
            tags.insert(w, Tag::Prep);
        }
        for w in CONJUNCTIONS {
            tags.insert(w, Tag::Conj);
        }
        for (w, _) in TIME_MARKERS {
            tags.insert(w, Tag::Time);
        }
        for w in OTHER_WORDS {
            tags.insert(w, Tag::Time);
        }
        for (subj, obj, person) in PRONOUNS {
            tags.insert(subj, Tag::SubjPron(*person));
            tags.insert(obj, Tag::ObjPron);
        }
        for (w, person) in CASELESS_PRONOUNS {
            tags.insert(w, Tag::Pron(*person));
        }
        for w in PLACES.iter().chain(TOPICS).chain(SINGULAR_SUBJECTS) {
            tags.insert(w, Tag::Noun { plural: false });
        }
        for (w, preps) in OBJECTS {
            tags.insert(w, Tag::Noun { plural: false });
            licensed.insert(w, preps);
        }
        for w in PLURAL_SUBJECTS {
            tags.insert(w, Tag::Noun { plural: true });
        }
        for (w, preps) in ADJECTIVES {
            tags.insert(w, Tag::Adj);
            licensed.insert(w, preps);
        }
        for (i, (w, ..)) in AUX_FORMS.iter().enumerate() {
            tags.insert(w, Tag::Aux { index: i });
        }

        let verbs: Vec<Verb> = PLACE_VERBS
            .iter()
            .chain(SOCIAL_VERBS)
            .chain(OBJECT_VERBS)
            .copied()
            .collect();
        for (i, verb) in verbs.iter().enumerate() {
            let id = VerbId(i);
            let forms = [
                (verb.base, VerbForm::Base),
                (verb.third, VerbForm::Third),
                (verb.past, VerbForm::Past),
                (verb.participle, VerbForm::Participle),
                (verb.ing, VerbForm::Ing),
            ];
            for (word, form) in forms {
                // the participle shares the past tag when the two coincide
                if form == VerbForm::Participle && word == verb.past {
                    continue;
                }
                tags.insert(word, Tag::Verb { verb: id, form });
                licensed.insert(word, verb.preps);
            }
        }
        // Fillers last: "like" is only ever a filler here.
        tags.insert("um", Tag::Filler);
        tags.insert("uh", Tag::Filler);
        tags.insert("like", Tag::Filler);
        tags.insert("know", Tag::Unknown);

        let mut by_len: BTreeMap<usize, Vec<&'static str>> = BTreeMap::new();
        for w in tags.keys() {
            by_len.entry(w.chars().count()).or_default().push(w);
        }

        Lexicon {
            verbs,
            tags,
            licensed,
            by_len,
        }
    }

    pub fn verbs(&self) -> &[Verb] {
        &self.verbs
    }

    pub fn verb(&self, id: VerbId) -> &Verb {
        &self.verbs[id.0]
    }

    /// Tag of a normalized (lowercased, punctuation-stripped) word.
    pub fn tag(&self, word: &str) -> Tag {
        self.tags.get(word).copied().unwrap_or(Tag::Unknown)
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.tags.contains_key(word)
    }

    /// Prepositions licensed directly after `word`, if the word takes any.
    pub fn licensed_preps(&self, word: &str) -> Option<&'static [&'static str]> {
        self.licensed.get(word).copied()
    }

    /// True when `word` is one transposition or substitution away from a
    /// dictionary word (and is not one itself).
    pub fn is_near_miss(&self, word: &str) -> bool {
        if self.is_known(word) || !word.chars().all(|c| c.is_ascii_alphabetic()) {
            return false;
        }
        let chars: Vec<char> = word.chars().collect();
        let Some(candidates) = self.by_len.get(&chars.len()) else {
            return false;
        };
        candidates.iter().any(|cand| one_edit_apart(&chars, cand))
    }

    pub fn form_of(&self, id: VerbId, form: VerbForm) -> &'static str {
        let verb = &self.verbs[id.0];
        match form {
            VerbForm::Base => verb.base,
            VerbForm::Third => verb.third,
            VerbForm::Past => verb.past,
            VerbForm::Participle => verb.participle,
            VerbForm::Ing => verb.ing,
        }
    }

    /// The present-tense lexical form agreeing with `person`.
    pub fn present_for(&self, id: VerbId, person: Option<Person>) -> &'static str {
        match person {
            Some(Person::ThirdSingular) => self.verbs[id.0].third,
            _ => self.verbs[id.0].base,
        }
    }

    /// All dictionary words, for tests and tooling.
    pub fn words(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.tags.keys().copied()
    }
}

/// Same length, and either one substituted character or one adjacent swap.
fn one_edit_apart(word: &[char], cand: &str) -> bool {
    let cand: Vec<char> = cand.chars().collect();
    if cand.len() != word.len() {
        return false;
    }
    let diffs: Vec<usize> = (0..word.len()).filter(|&i| word[i] != cand[i]).collect();
    match diffs.as_slice() {
        [_] => true,
        [a, b] => *b == a + 1 && word[*a] == cand[*b] && word[*b] == cand[*a],
        _ => false,
    }
}

/// Person of a subject pronoun or noun tag.
pub fn subject_person(tag: Tag) -> Option<Person> {
    match tag {
        Tag::SubjPron(p) | Tag::Pron(p) => Some(p),
        Tag::Noun { plural: true } => Some(Person::Plural),
        Tag::Noun { plural: false } => Some(Person::ThirdSingular),
        _ => None,
    }
}

/// Object form of a subject pronoun and vice versa.
pub fn swap_case(word: &str) -> Option<&'static str> {
    PRONOUNS.iter().find_map(|(subj, obj, _)| {
        if word == *subj {
            Some(*obj)
        } else if word == *obj {
            Some(*subj)
        } else {
            None
        }
    })
}

/// Renders a pronoun with conventional casing: "I" is always capital,
/// anything else only at the start of a sentence.
pub fn pronoun_surface(word: &str, sentence_initial: bool) -> String {
    if word == "i" {
        String::from("I")
    } else if sentence_initial {
        crate::text::capitalize(word)
    } else {
        String::from(word)
    }
}
