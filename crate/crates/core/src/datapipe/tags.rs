use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

macro_rules! text_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Format(format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        s
                    ))),
                }
            }
        }
    };
}

text_enum!(
    /// Which generator produced a sample.
    Family {
        Synthetic => "synthetic",
        RealAnalog => "real_analog",
    }
);

text_enum!(TimeOfDay {
    Day => "day",
    Night => "night",
});

text_enum!(Viewpoint {
    Overhead => "overhead",
    Angled => "angled",
    Close => "close",
    Far => "far",
});

/// Acquisition condition of a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Condition {
    pub time: TimeOfDay,
    pub viewpoint: Viewpoint,
    pub background_class: u32,
}

impl Condition {
    pub fn new(time: TimeOfDay, viewpoint: Viewpoint, background_class: u32) -> Self {
        Self {
            time,
            viewpoint,
            background_class,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Tags {
    pub provenance: Family,
    pub condition: Condition,
}

/// Conjunction of per-field alternatives over [`Tags`], e.g.
/// `time=night background=1,2 family=real_analog`. A field that is not
/// mentioned matches anything.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagFilter {
    pub family: Option<Vec<Family>>,
    pub time: Option<Vec<TimeOfDay>>,
    pub viewpoint: Option<Vec<Viewpoint>>,
    pub background: Option<Vec<u32>>,
}

fn list<T: FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(|p| p.trim().parse()).collect()
}

impl TagFilter {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn matches(&self, tags: &Tags) -> bool {
        fn ok<T: PartialEq>(allowed: &Option<Vec<T>>, v: &T) -> bool {
            allowed.as_ref().is_none_or(|a| a.contains(v))
        }
        ok(&self.family, &tags.provenance)
            && ok(&self.time, &tags.condition.time)
            && ok(&self.viewpoint, &tags.condition.viewpoint)
            && ok(&self.background, &tags.condition.background_class)
    }
}

impl FromStr for TagFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = TagFilter::default();
        let s = s.trim();
        if s.is_empty() || s == "*" {
            return Ok(f);
        }
        for term in s.split_whitespace() {
            let (key, values) = term
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("filter term `{term}` is not key=values")))?;
            let bad = |e: Error| Error::Config(format!("filter term `{term}`: {e}"));
            match key {
                "family" => f.family = Some(list(values).map_err(bad)?),
                "time" => f.time = Some(list(values).map_err(bad)?),
                "viewpoint" => f.viewpoint = Some(list(values).map_err(bad)?),
                "background" => {
                    f.background = Some(
                        values
                            .split(',')
                            .map(|v| {
                                v.trim()
                                    .parse()
                                    .map_err(|_| Error::Config(format!("bad background class `{v}`")))
                            })
                            .collect::<Result<_>>()?,
                    )
                }
                _ => return Err(Error::Config(format!("unknown filter key `{key}`"))),
            }
        }
        Ok(f)
    }
}

impl fmt::Display for TagFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut parts = Vec::new();
        if let Some(v) = &self.family {
            parts.push(format!("family={}", join(v)));
        }
        if let Some(v) = &self.time {
            parts.push(format!("time={}", join(v)));
        }
        if let Some(v) = &self.viewpoint {
            parts.push(format!("viewpoint={}", join(v)));
        }
        if let Some(v) = &self.background {
            parts.push(format!("background={}", join(v)));
        }
        if parts.is_empty() {
            f.write_str("*")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}
