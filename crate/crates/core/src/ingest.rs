//! Match and player-attribute ingestion.
//!
//! Raw tennis-data result files are read by header name, cleaned of
//! incomplete matches, filtered to the top four event tiers and grouped into
//! tournament-round snapshots. A canonical match ledger is written so the
//! later stages never touch the raw files again.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tour {
    Men,
    Women,
}

impl Tour {
    pub const ALL: [Tour; 2] = [Tour::Men, Tour::Women];

    pub fn as_str(self) -> &'static str {
        match self {
            Tour::Men => "men",
            Tour::Women => "women",
        }
    }
}

impl fmt::Display for Tour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tour {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "men" | "atp" | "m" => Ok(Tour::Men),
            "women" | "wta" | "w" => Ok(Tour::Women),
            other => Err(format!("unknown tour `{other}`")),
        }
    }
}

/// Event tier. Only the first four survive [`filter_tiers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    GrandSlam,
    Finals,
    T1000,
    T500,
    T250,
    Other,
}

impl Tier {
    pub const RETAINED: [Tier; 4] = [Tier::GrandSlam, Tier::Finals, Tier::T1000, Tier::T500];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::GrandSlam => "grand_slam",
            Tier::Finals => "finals",
            Tier::T1000 => "t1000",
            Tier::T500 => "t500",
            Tier::T250 => "t250",
            Tier::Other => "other",
        }
    }

    /// Maps the series/tier labels used by the ATP and WTA result files
    /// (including the pre-2021 WTA Premier naming) onto tiers.
    pub fn from_source_label(label: &str) -> Tier {
        let key: String = label
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "grandslam" => Tier::GrandSlam,
            "masterscup" | "tourchampionships" | "wtafinals" | "atpfinals" | "finals"
            | "tourfinals" | "wtatourchampionships" => Tier::Finals,
            "masters1000" | "masters" | "atp1000" | "wta1000" | "premiermandatory" | "premier5"
            | "t1000" => Tier::T1000,
            "atp500" | "internationalgold" | "wta500" | "premier" | "t500" => Tier::T500,
            "atp250" | "international" | "wta250" | "t250" => Tier::T250,
            _ => Tier::Other,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(Tier::from_source_label(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Hard,
    Clay,
    Grass,
}

impl Surface {
    pub const ALL: [Surface; 3] = [Surface::Hard, Surface::Clay, Surface::Grass];

    pub fn index(self) -> usize {
        match self {
            Surface::Hard => 0,
            Surface::Clay => 1,
            Surface::Grass => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Surface::Hard => "hard",
            Surface::Clay => "clay",
            Surface::Grass => "grass",
        }
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Surface {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hard" => Ok(Surface::Hard),
            "clay" => Ok(Surface::Clay),
            "grass" => Ok(Surface::Grass),
            other => Err(format!("unknown surface `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

impl FromStr for Handedness {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l" | "left" | "left-handed" => Ok(Handedness::Left),
            "r" | "right" | "right-handed" => Ok(Handedness::Right),
            other => Err(format!("unknown handedness `{other}`")),
        }
    }
}

/// Games won in one set, from the match winner's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetScore {
    pub winner_games: u32,
    pub loser_games: u32,
}

impl SetScore {
    /// `Some(true)` when the match winner took this set.
    pub fn won_by_match_winner(&self) -> Option<bool> {
        match self.winner_games.cmp(&self.loser_games) {
            std::cmp::Ordering::Greater => Some(true),
            std::cmp::Ordering::Less => Some(false),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub date: NaiveDate,
    pub tour: Tour,
    pub tournament: String,
    pub tier: Tier,
    pub round: String,
    pub surface: Surface,
    pub best_of: u8,
    pub winner_id: String,
    pub loser_id: String,
    pub sets: Vec<SetScore>,
    pub games_winner: u32,
    pub games_loser: u32,
    pub odds_winner: Option<f64>,
    pub odds_loser: Option<f64>,
}

impl MatchRecord {
    /// Proportion of games won by the match winner.
    pub fn winner_games_share(&self) -> f64 {
        let total = self.games_winner + self.games_loser;
        if total == 0 {
            0.5
        } else {
            self.games_winner as f64 / total as f64
        }
    }

    pub fn has_odds(&self) -> bool {
        self.odds_winner.is_some() && self.odds_loser.is_some()
    }

    pub fn involves(&self, player: &str) -> bool {
        self.winner_id == player || self.loser_id == player
    }
}

/// Raw attribute row; every field may be missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawPlayerAttributes {
    pub player_id: String,
    pub name: String,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub birth_date: Option<NaiveDate>,
    pub handedness: Option<Handedness>,
}

/// Complete attribute record after imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerAttributes {
    pub player_id: String,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub birth_date: NaiveDate,
    pub handedness: Handedness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub tour: Tour,
    pub tournament: String,
    pub season: i32,
    pub round: String,
    /// Earliest match date in the round.
    pub timestamp: NaiveDate,
    pub matches: Vec<MatchRecord>,
}

/// Outcome of parsing one raw results file.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub records: Vec<MatchRecord>,
    pub dropped_incomplete: usize,
    pub dropped_bad_score: usize,
    pub dropped_invalid: usize,
    pub unmatched_names: BTreeSet<String>,
}

/// Explicit name → player id mapping. Names absent from the map are kept
/// verbatim as ids and reported; no fuzzy matching is attempted.
#[derive(Debug, Clone, Default)]
pub struct NameMap {
    map: HashMap<String, String>,
}

impl NameMap {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        NameMap {
            map: pairs
                .into_iter()
                .map(|(n, id)| (n.into().trim().to_string(), id.into()))
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = open_csv(path)?;
        let headers = rdr.headers()?.clone();
        let name_col = column(&headers, path, &["name"])?;
        let id_col = column(&headers, path, &["player_id", "id"])?;
        let mut map = HashMap::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let name = row.get(name_col).unwrap_or("").trim();
            let id = row.get(id_col).unwrap_or("").trim();
            if name.is_empty() || id.is_empty() {
                return Err(Error::BadRow {
                    row: i + 2,
                    message: "empty name or player_id".into(),
                });
            }
            map.insert(name.to_string(), id.to_string());
        }
        Ok(NameMap { map })
    }

    fn resolve(&self, name: &str, unmatched: &mut BTreeSet<String>) -> String {
        match self.map.get(name) {
            Some(id) => id.clone(),
            None => {
                unmatched.insert(name.to_string());
                name.to_string()
            }
        }
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_path(path)?)
}

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| {
        let h = h.trim();
        names.iter().any(|n| h.eq_ignore_ascii_case(n))
    })
}

fn column(headers: &csv::StringRecord, path: &Path, names: &[&str]) -> Result<usize> {
    find_column(headers, names).ok_or_else(|| Error::MalformedHeader {
        path: path.display().to_string(),
        column: names[0].to_string(),
    })
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let head = s.split(|c| c == ' ' || c == 'T').next().unwrap_or(s);
    NaiveDate::parse_from_str(head, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(head, "%d/%m/%Y"))
        .or_else(|_| NaiveDate::parse_from_str(head, "%d/%m/%y"))
        .or_else(|_| NaiveDate::parse_from_str(head, "%Y/%m/%d"))
        .ok()
}

fn parse_odds(s: Option<&str>) -> Option<f64> {
    let v: f64 = s?.trim().parse().ok()?;
    (v.is_finite() && v > 1.0).then_some(v)
}

/// Parses one tennis-data results file (one tour-year).
///
/// `tour` overrides detection; otherwise the presence of an `ATP` or `WTA`
/// column decides it.
pub fn parse_match_csv(path: &Path, tour: Option<Tour>, names: Option<&NameMap>) -> Result<ParseReport> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();

    let tour = match tour {
        Some(t) => t,
        None if find_column(&headers, &["ATP"]).is_some() => Tour::Men,
        None if find_column(&headers, &["WTA"]).is_some() => Tour::Women,
        None => {
            return Err(Error::MalformedHeader {
                path: path.display().to_string(),
                column: "ATP/WTA".into(),
            })
        }
    };

    let c_date = column(&headers, path, &["Date"])?;
    let c_tournament = column(&headers, path, &["Tournament"])?;
    let c_tier = column(&headers, path, &["Series", "Tier"])?;
    let c_surface = column(&headers, path, &["Surface"])?;
    let c_round = column(&headers, path, &["Round"])?;
    let c_winner = column(&headers, path, &["Winner"])?;
    let c_loser = column(&headers, path, &["Loser"])?;
    let c_best_of = find_column(&headers, &["Best of", "Best_of", "BestOf"]);
    let c_comment = find_column(&headers, &["Comment"]);
    let c_psw = find_column(&headers, &["PSW"]);
    let c_psl = find_column(&headers, &["PSL"]);
    let set_cols: Vec<(Option<usize>, Option<usize>)> = (1..=5)
        .map(|k| {
            (
                find_column(&headers, &[&format!("W{k}")]),
                find_column(&headers, &[&format!("L{k}")]),
            )
        })
        .collect();
    if set_cols[0].0.is_none() || set_cols[0].1.is_none() {
        return Err(Error::MalformedHeader {
            path: path.display().to_string(),
            column: "W1/L1".into(),
        });
    }

    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "matches".into());
    let empty = NameMap::default();
    let names = names.unwrap_or(&empty);
    let mut report = ParseReport::default();

    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 2;
        let field = |c: usize| row.get(c).unwrap_or("").trim();

        if field(c_date).is_empty() && field(c_winner).is_empty() && field(c_loser).is_empty() {
            continue;
        }

        let date = parse_date(field(c_date)).ok_or_else(|| Error::BadRow {
            row: row_no,
            message: format!("unparseable date `{}`", field(c_date)),
        })?;
        let winner = field(c_winner);
        let loser = field(c_loser);
        if winner.is_empty() || loser.is_empty() {
            return Err(Error::BadRow {
                row: row_no,
                message: "missing player name".into(),
            });
        }
        let surface: Surface = field(c_surface).parse().map_err(|m| Error::BadRow { row: row_no, message: m })?;

        if let Some(c) = c_comment {
            let comment = field(c).to_ascii_lowercase();
            if !(comment.is_empty() || comment == "completed") {
                report.dropped_incomplete += 1;
                continue;
            }
        }

        let mut sets = Vec::new();
        let mut bad_score = false;
        for (wc, lc) in &set_cols {
            let (Some(wc), Some(lc)) = (wc, lc) else { continue };
            let (w, l) = (field(*wc), field(*lc));
            if w.is_empty() && l.is_empty() {
                continue;
            }
            match (parse_games(w), parse_games(l)) {
                (Some(w), Some(l)) => sets.push(SetScore {
                    winner_games: w,
                    loser_games: l,
                }),
                _ => bad_score = true,
            }
        }
        let games_winner: u32 = sets.iter().map(|s| s.winner_games).sum();
        let games_loser: u32 = sets.iter().map(|s| s.loser_games).sum();
        if bad_score || games_winner + games_loser == 0 {
            report.dropped_bad_score += 1;
            continue;
        }

        let tier = Tier::from_source_label(field(c_tier));
        let best_of = match c_best_of.map(field).filter(|s| !s.is_empty()) {
            Some(s) => match s.parse::<f64>().ok().map(|v| v as u8) {
                Some(v @ (3 | 5)) => v,
                _ => {
                    report.dropped_invalid += 1;
                    continue;
                }
            },
            None if tour == Tour::Men && tier == Tier::GrandSlam => 5,
            None => 3,
        };
        if best_of == 5 && !(tour == Tour::Men && tier == Tier::GrandSlam) {
            report.dropped_invalid += 1;
            continue;
        }

        let (odds_winner, odds_loser) = match (
            parse_odds(c_psw.map(field)),
            parse_odds(c_psl.map(field)),
        ) {
            (Some(w), Some(l)) => (Some(w), Some(l)),
            _ => (None, None),
        };

        let winner_id = names.resolve(winner, &mut report.unmatched_names);
        let loser_id = names.resolve(loser, &mut report.unmatched_names);
        if winner_id == loser_id {
            report.dropped_invalid += 1;
            continue;
        }

        report.records.push(MatchRecord {
            match_id: format!("{stem}:{row_no}"),
            date,
            tour,
            tournament: field(c_tournament).to_string(),
            tier,
            round: field(c_round).to_string(),
            surface,
            best_of,
            winner_id,
            loser_id,
            sets,
            games_winner,
            games_loser,
            odds_winner,
            odds_loser,
        });
    }

    sort_records(&mut report.records);
    Ok(report)
}

fn parse_games(s: &str) -> Option<u32> {
    let v: f64 = s.parse().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v < 100.0).then_some(v as u32)
}

/// Parses every `.csv` file in `dir` (in file-name order) as results for
/// `tour` and merges the reports; records come back sorted.
pub fn parse_results_dir(dir: &Path, tour: Tour, names: Option<&NameMap>) -> Result<ParseReport> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    files.sort();
    if files.is_empty() {
        return Err(Error::MissingFile(dir.join("*.csv")));
    }
    let mut all = ParseReport::default();
    for f in &files {
        let r = parse_match_csv(f, Some(tour), names)?;
        all.records.extend(r.records);
        all.dropped_incomplete += r.dropped_incomplete;
        all.dropped_bad_score += r.dropped_bad_score;
        all.dropped_invalid += r.dropped_invalid;
        all.unmatched_names.extend(r.unmatched_names);
    }
    sort_records(&mut all.records);
    Ok(all)
}

/// Stable, total order on records: date, then match id.
pub fn sort_records(records: &mut [MatchRecord]) {
    records.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.match_id.cmp(&b.match_id)));
}

pub fn read_attributes(path: &Path) -> Result<Vec<RawPlayerAttributes>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    let c_id = column(&headers, path, &["player_id"])?;
    let c_name = find_column(&headers, &["name"]);
    let c_h = column(&headers, path, &["height_cm"])?;
    let c_w = column(&headers, path, &["weight_kg"])?;
    let c_b = column(&headers, path, &["birth_date"])?;
    let c_hand = column(&headers, path, &["handedness"])?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let get = |c: usize| row.get(c).unwrap_or("").trim();
        let id = get(c_id);
        if id.is_empty() {
            return Err(Error::BadRow {
                row: i + 2,
                message: "missing player_id".into(),
            });
        }
        let positive = |s: &str| s.parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite());
        out.push(RawPlayerAttributes {
            player_id: id.to_string(),
            name: c_name.map(get).unwrap_or("").to_string(),
            height_cm: positive(get(c_h)),
            weight_kg: positive(get(c_w)),
            birth_date: parse_date(get(c_b)),
            handedness: get(c_hand).parse().ok(),
        });
    }
    Ok(out)
}

/// Writes attribute rows in the layout [`read_attributes`] accepts.
pub fn write_attributes<W: std::io::Write>(attrs: &[RawPlayerAttributes], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["player_id", "name", "height_cm", "weight_kg", "birth_date", "handedness"])?;
    for a in attrs {
        w.write_record([
            a.player_id.clone(),
            a.name.clone(),
            opt_f64(a.height_cm),
            opt_f64(a.weight_kg),
            a.birth_date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default(),
            match a.handedness {
                Some(Handedness::Left) => "L".into(),
                Some(Handedness::Right) => "R".into(),
                None => String::new(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Completes the attribute record of every roster player.
///
/// Medians are taken over the known values of roster players only, so the
/// caller controls the tour split by passing one tour's roster at a time.
/// Missing handedness becomes right-handed.
pub fn impute_attributes(attrs: &[RawPlayerAttributes], roster: &BTreeSet<String>) -> Result<Vec<PlayerAttributes>> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster);
    }
    let by_id: HashMap<&str, &RawPlayerAttributes> = attrs
        .iter()
        .filter(|a| roster.contains(&a.player_id))
        .map(|a| (a.player_id.as_str(), a))
        .collect();

    let mut heights: Vec<f64> = by_id.values().filter_map(|a| a.height_cm).collect();
    let mut weights: Vec<f64> = by_id.values().filter_map(|a| a.weight_kg).collect();
    let mut births: Vec<f64> = by_id
        .values()
        .filter_map(|a| a.birth_date.map(|d| d.num_days_from_ce() as f64))
        .collect();

    let missing = |what: &str| Error::Config(format!("no known {what} values to impute from"));
    let med_h = median(&mut heights);
    let med_w = median(&mut weights);
    let med_b = median(&mut births)
        .map(|d| NaiveDate::from_num_days_from_ce_opt(d.floor() as i32).expect("median of valid dates"));

    roster
        .iter()
        .map(|id| {
            let raw = by_id.get(id.as_str());
            Ok(PlayerAttributes {
                player_id: id.clone(),
                height_cm: match raw.and_then(|a| a.height_cm) {
                    Some(v) => v,
                    None => med_h.ok_or_else(|| missing("height"))?,
                },
                weight_kg: match raw.and_then(|a| a.weight_kg) {
                    Some(v) => v,
                    None => med_w.ok_or_else(|| missing("weight"))?,
                },
                birth_date: match raw.and_then(|a| a.birth_date) {
                    Some(v) => v,
                    None => med_b.ok_or_else(|| missing("birth date"))?,
                },
                handedness: raw.and_then(|a| a.handedness).unwrap_or(Handedness::Right),
            })
        })
        .collect()
}

pub fn filter_tiers(records: Vec<MatchRecord>) -> Vec<MatchRecord> {
    records
        .into_iter()
        .filter(|r| Tier::RETAINED.contains(&r.tier))
        .collect()
}

/// Players appearing in a tour's records.
pub fn roster(records: &[MatchRecord], tour: Tour) -> BTreeSet<String> {
    records
        .iter()
        .filter(|r| r.tour == tour)
        .flat_map(|r| [r.winner_id.clone(), r.loser_id.clone()])
        .collect()
}

/// Position of a round on the canonical ladder; round robins sort first and
/// are otherwise ordered by date.
pub fn round_order(round: &str) -> u8 {
    let key: String = round
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "roundrobin" | "rr" => 0,
        "1stround" | "r128" | "firstround" => 1,
        "2ndround" | "r64" | "secondround" => 2,
        "3rdround" | "r32" | "thirdround" => 3,
        "4thround" | "r16" | "fourthround" => 4,
        "quarterfinals" | "quarterfinal" | "qf" => 5,
        "semifinals" | "semifinal" | "sf" => 6,
        "thefinal" | "final" | "f" => 7,
        _ => 0,
    }
}

/// Groups one tour's records into tournament-round snapshots ordered by
/// (earliest date, round order, tournament name).
pub fn build_snapshots(records: &[MatchRecord], tour: Tour) -> Vec<Snapshot> {
    let mut groups: BTreeMap<(String, i32, String), Vec<MatchRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.tour == tour) {
        groups
            .entry((r.tournament.clone(), r.date.year(), r.round.clone()))
            .or_default()
            .push(r.clone());
    }
    let mut snaps: Vec<Snapshot> = groups
        .into_iter()
        .map(|((tournament, season, round), mut matches)| {
            sort_records(&mut matches);
            Snapshot {
                index: 0,
                tour,
                tournament,
                season,
                timestamp: matches[0].date,
                round,
                matches,
            }
        })
        .collect();
    snaps.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| round_order(&a.round).cmp(&round_order(&b.round)))
            .then_with(|| a.tournament.cmp(&b.tournament))
            .then_with(|| a.season.cmp(&b.season))
            .then_with(|| a.round.cmp(&b.round))
    });
    for (i, s) in snaps.iter_mut().enumerate() {
        s.index = i;
    }
    snaps
}

/// Snapshots whose timestamp lies in `[start, end]`.
pub fn select_window(snapshots: &[Snapshot], start: NaiveDate, end: NaiveDate) -> Vec<&Snapshot> {
    snapshots
        .iter()
        .filter(|s| s.timestamp >= start && s.timestamp <= end)
        .collect()
}

const LEDGER_HEADER: [&str; 15] = [
    "match_id",
    "date",
    "tour",
    "tournament",
    "tier",
    "round",
    "surface",
    "best_of",
    "winner_id",
    "loser_id",
    "sets",
    "games_winner",
    "games_loser",
    "odds_winner",
    "odds_loser",
];

fn format_sets(sets: &[SetScore]) -> String {
    sets.iter()
        .map(|s| format!("{}-{}", s.winner_games, s.loser_games))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_sets(s: &str) -> Option<Vec<SetScore>> {
    s.split_whitespace()
        .map(|part| {
            let (w, l) = part.split_once('-')?;
            Some(SetScore {
                winner_games: w.parse().ok()?,
                loser_games: l.parse().ok()?,
            })
        })
        .collect()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the canonical match ledger (ISO dates, fixed column order).
pub fn write_match_ledger<W: std::io::Write>(records: &[MatchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LEDGER_HEADER)?;
    for r in records {
        w.write_record([
            r.match_id.clone(),
            r.date.format("%Y-%m-%d").to_string(),
            r.tour.to_string(),
            r.tournament.clone(),
            r.tier.to_string(),
            r.round.clone(),
            r.surface.to_string(),
            r.best_of.to_string(),
            r.winner_id.clone(),
            r.loser_id.clone(),
            format_sets(&r.sets),
            r.games_winner.to_string(),
            r.games_loser.to_string(),
            opt_f64(r.odds_winner),
            opt_f64(r.odds_loser),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_match_ledger(path: &Path) -> Result<Vec<MatchRecord>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    for col in LEDGER_HEADER {
        column(&headers, path, &[col])?;
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 2;
        let bad = |m: String| Error::BadRow { row: row_no, message: m };
        let get = |c: usize| row.get(c).unwrap_or("");
        let opt = |c: usize| -> std::result::Result<Option<f64>, Error> {
            let s = get(c);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(format!("bad odds `{s}`")))
            }
        };
        let sets = parse_sets(get(10)).ok_or_else(|| bad("bad sets".into()))?;
        out.push(MatchRecord {
            match_id: get(0).to_string(),
            date: parse_date(get(1)).ok_or_else(|| bad("bad date".into()))?,
            tour: get(2).parse().map_err(bad)?,
            tournament: get(3).to_string(),
            tier: get(4).parse().map_err(bad)?,
            round: get(5).to_string(),
            surface: get(6).parse().map_err(bad)?,
            best_of: get(7).parse().map_err(|_| bad("bad best_of".into()))?,
            winner_id: get(8).to_string(),
            loser_id: get(9).to_string(),
            games_winner: get(11).parse().map_err(|_| bad("bad games".into()))?,
            games_loser: get(12).parse().map_err(|_| bad("bad games".into()))?,
            sets,
            odds_winner: opt(13)?,
            odds_loser: opt(14)?,
        });
    }
    Ok(out)
}
