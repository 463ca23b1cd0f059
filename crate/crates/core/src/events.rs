//! Observations, event sets, clusterings and their CSV forms.
//!
//! Event file: header `id,time,x0[,x1,...][,truth]`, one row per observation.
//! The optional `truth` column holds a 0-based cluster label or `noise`.
//!
//! Clustering file: header `id,label`, one row per observation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub type ObservationId = u64;

/// Label written for clutter observations.
pub const NOISE_LABEL: &str = "noise";

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub id: ObservationId,
    pub time: f64,
    pub state: Vec<f64>,
}

impl Observation {
    pub fn new(id: ObservationId, time: f64, state: Vec<f64>) -> Self {
        Self { id, time, state }
    }
}

/// A set of observations of a common state dimension, ordered by `(time, id)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSet {
    observations: Vec<Observation>,
    dimension: usize,
    index: HashMap<ObservationId, usize>,
}

impl EventSet {
    pub fn new(mut observations: Vec<Observation>, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("state dimension must be at least 1".into()));
        }
        for obs in &observations {
            if obs.state.len() != dimension {
                return Err(Error::DimensionMismatch {
                    id: obs.id,
                    expected: dimension,
                    got: obs.state.len(),
                });
            }
            if !obs.time.is_finite() {
                return Err(Error::Config(format!(
                    "observation {} has non-finite time",
                    obs.id
                )));
            }
            if obs.state.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "observation {} has a non-finite state",
                    obs.id
                )));
            }
        }
        observations.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.id.cmp(&b.id)));
        let mut index = HashMap::with_capacity(observations.len());
        for (pos, obs) in observations.iter().enumerate() {
            if index.insert(obs.id, pos).is_some() {
                return Err(Error::DuplicateId(obs.id));
            }
        }
        Ok(Self {
            observations,
            dimension,
            index,
        })
    }

    /// Builds an event set whose dimension is taken from the first observation.
    pub fn from_observations(observations: Vec<Observation>) -> Result<Self> {
        let dimension = observations.first().map_or(1, |o| o.state.len());
        Self::new(observations, dimension)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    /// Position of `id` in time order.
    pub fn position(&self, id: ObservationId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn get(&self, id: ObservationId) -> Option<&Observation> {
        self.position(id).map(|p| &self.observations[p])
    }

    pub fn ids(&self) -> impl Iterator<Item = ObservationId> + '_ {
        self.observations.iter().map(|o| o.id)
    }

    /// `(first, last)` observation times, or `None` when empty.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.observations.first()?.time, self.observations.last()?.time))
    }

    /// Concatenates two sets; ids must not collide.
    pub fn merged(&self, other: &EventSet) -> Result<EventSet> {
        if !self.is_empty() && !other.is_empty() && self.dimension != other.dimension {
            return Err(Error::Config(format!(
                "cannot merge event sets of dimension {} and {}",
                self.dimension, other.dimension
            )));
        }
        let dimension = if self.is_empty() {
            other.dimension
        } else {
            self.dimension
        };
        let mut all = self.observations.clone();
        all.extend(other.observations.iter().cloned());
        EventSet::new(all, dimension)
    }
}

impl<'a> IntoIterator for &'a EventSet {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

/// A partition of observation ids into ordered clusters plus a noise set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Clustering {
    clusters: Vec<Vec<ObservationId>>,
    noise: BTreeSet<ObservationId>,
}

impl Clustering {
    /// Checks that no id occurs twice and that no cluster is empty. Ordering
    /// against observation times is checked by [`Clustering::validate`].
    pub fn new(
        clusters: Vec<Vec<ObservationId>>,
        noise: impl IntoIterator<Item = ObservationId>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for cluster in &clusters {
            if cluster.is_empty() {
                return Err(Error::InvalidClustering("empty cluster".into()));
            }
            for &id in cluster {
                if !seen.insert(id) {
                    return Err(Error::InvalidClustering(format!(
                        "id {id} assigned more than once"
                    )));
                }
            }
        }
        let mut noise_set = BTreeSet::new();
        for id in noise {
            if !seen.insert(id) || !noise_set.insert(id) {
                return Err(Error::InvalidClustering(format!(
                    "id {id} assigned more than once"
                )));
            }
        }
        Ok(Self {
            clusters,
            noise: noise_set,
        })
    }

    /// Every id labelled as clutter (`K = 0`).
    pub fn all_noise(ids: impl IntoIterator<Item = ObservationId>) -> Self {
        Self {
            clusters: Vec::new(),
            noise: ids.into_iter().collect(),
        }
    }

    pub fn clusters(&self) -> &[Vec<ObservationId>] {
        &self.clusters
    }

    pub fn noise(&self) -> &BTreeSet<ObservationId> {
        &self.noise
    }

    /// Number of clusters, `K`.
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Number of noise observations, `H`.
    pub fn num_noise(&self) -> usize {
        self.noise.len()
    }

    pub fn num_signal(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// All ids covered by the clustering.
    pub fn ids(&self) -> BTreeSet<ObservationId> {
        self.clusters
            .iter()
            .flatten()
            .copied()
            .chain(self.noise.iter().copied())
            .collect()
    }

    pub fn is_signal(&self, id: ObservationId) -> bool {
        self.clusters.iter().any(|c| c.contains(&id))
    }

    /// Consecutive `(from, to)` id pairs within clusters.
    pub fn transitions(&self) -> impl Iterator<Item = (ObservationId, ObservationId)> + '_ {
        self.clusters
            .iter()
            .flat_map(|c| c.windows(2).map(|w| (w[0], w[1])))
    }

    /// Label per id: `Some(k)` for cluster `k`, `None` for noise.
    pub fn labels(&self) -> BTreeMap<ObservationId, Option<usize>> {
        let mut out = BTreeMap::new();
        for (k, cluster) in self.clusters.iter().enumerate() {
            for &id in cluster {
                out.insert(id, Some(k));
            }
        }
        for &id in &self.noise {
            out.insert(id, None);
        }
        out
    }

    /// Checks the partition property against `events` and that every cluster
    /// is strictly ascending in time.
    pub fn validate(&self, events: &EventSet) -> Result<()> {
        let ids = self.ids();
        if ids.len() != events.len() {
            return Err(Error::InvalidClustering(format!(
                "clustering covers {} ids, event set has {}",
                ids.len(),
                events.len()
            )));
        }
        for id in &ids {
            if events.position(*id).is_none() {
                return Err(Error::InvalidClustering(format!(
                    "id {id} is not in the event set"
                )));
            }
        }
        for cluster in &self.clusters {
            for w in cluster.windows(2) {
                let (a, b) = (events.get(w[0]).unwrap(), events.get(w[1]).unwrap());
                if !(a.time < b.time) {
                    return Err(Error::InvalidClustering(format!(
                        "cluster step {} -> {} is not strictly forward in time",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reorders clusters by the time of their first observation.
    pub fn sort_clusters(&mut self, events: &EventSet) {
        self.clusters
            .sort_by_key(|c| events.position(c[0]).unwrap_or(usize::MAX));
    }

    /// Adds ids to the noise set, e.g. clutter appended after generation.
    pub fn with_extra_noise(&self, ids: impl IntoIterator<Item = ObservationId>) -> Result<Self> {
        let noise = self.noise.iter().copied().chain(ids);
        Clustering::new(self.clusters.clone(), noise)
    }

    /// Restricts the clustering to ids in `keep`, dropping emptied clusters.
    pub fn restricted_to(&self, keep: &BTreeSet<ObservationId>) -> Clustering {
        let clusters = self
            .clusters
            .iter()
            .map(|c| c.iter().copied().filter(|id| keep.contains(id)).collect::<Vec<_>>())
            .filter(|c| !c.is_empty())
            .collect();
        let noise = self.noise.intersection(keep).copied().collect();
        Clustering { clusters, noise }
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_label(path: &Path, line: u64, raw: &str) -> Result<Option<u64>> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case(NOISE_LABEL) {
        return Ok(None);
    }
    raw.parse::<u64>()
        .map(Some)
        .map_err(|_| parse_err(path, line, format!("bad label {raw:?}")))
}

/// Groups `(id, label)` pairs, in input order, into a clustering. Cluster
/// indices follow ascending label value.
fn group_labels(rows: Vec<(ObservationId, Option<u64>)>) -> Result<Clustering> {
    let mut groups: BTreeMap<u64, Vec<ObservationId>> = BTreeMap::new();
    let mut noise = Vec::new();
    for (id, label) in rows {
        match label {
            Some(l) => groups.entry(l).or_default().push(id),
            None => noise.push(id),
        }
    }
    Clustering::new(groups.into_values().collect(), noise)
}

/// Reads an event file. Any `truth` column is skipped without being parsed.
pub fn read_events(path: impl AsRef<Path>) -> Result<EventSet> {
    read_event_file(path.as_ref(), false).map(|(events, _)| events)
}

/// Reads an event file together with its `truth` column, if present.
pub fn read_events_with_truth(path: impl AsRef<Path>) -> Result<(EventSet, Option<Clustering>)> {
    read_event_file(path.as_ref(), true)
}

fn read_event_file(path: &Path, parse_truth: bool) -> Result<(EventSet, Option<Clustering>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[0] != "id" || names[1] != "time" {
        return Err(parse_err(
            path,
            1,
            "header must start with `id,time,x0`",
        ));
    }
    let has_truth = names.last() == Some(&"truth");
    let state_cols = names.len() - 2 - usize::from(has_truth);
    for (k, name) in names[2..2 + state_cols].iter().enumerate() {
        if *name != format!("x{k}") {
            return Err(parse_err(path, 1, format!("expected column x{k}, found {name:?}")));
        }
    }
    if state_cols == 0 {
        return Err(parse_err(path, 1, "no state columns"));
    }

    let mut observations = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != names.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        let id: ObservationId = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad id {:?}", &record[0])))?;
        let time: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad time {:?}", &record[1])))?;
        if !time.is_finite() {
            return Err(parse_err(path, line, "time is not finite"));
        }
        let state = (0..state_cols)
            .map(|k| {
                record[2 + k]
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("bad state {:?}", &record[2 + k])))
            })
            .collect::<Result<Vec<_>>>()?;
        if has_truth && parse_truth {
            labels.push((id, parse_label(path, line, &record[2 + state_cols])?));
        }
        observations.push(Observation { id, time, state });
    }

    let events = EventSet::new(observations, state_cols)?;
    let truth = if has_truth && parse_truth {
        // cluster members are ordered by time, not by row order
        labels.sort_by_key(|(id, _)| events.position(*id));
        Some(group_labels(labels)?)
    } else {
        None
    };
    Ok((events, truth))
}

/// Writes an event file, with a `truth` column when `truth` is given.
pub fn write_events(
    events: &EventSet,
    truth: Option<&Clustering>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    write_events_to(events, truth, &mut writer)?;
    writer.flush()?;
    Ok(())
}

fn write_events_to<W: Write>(
    events: &EventSet,
    truth: Option<&Clustering>,
    writer: &mut csv::Writer<W>,
) -> Result<()> {
    let mut header = vec!["id".to_string(), "time".to_string()];
    header.extend((0..events.dimension()).map(|k| format!("x{k}")));
    let labels = truth.map(|t| t.labels());
    if labels.is_some() {
        header.push("truth".into());
    }
    writer.write_record(&header)?;
    for obs in events {
        let mut row = vec![obs.id.to_string(), obs.time.to_string()];
        row.extend(obs.state.iter().map(|v| v.to_string()));
        if let Some(labels) = &labels {
            let label = labels.get(&obs.id).ok_or_else(|| {
                Error::InvalidClustering(format!("truth has no label for id {}", obs.id))
            })?;
            row.push(label_text(*label));
        }
        writer.write_record(&row)?;
    }
    Ok(())
}

fn label_text(label: Option<usize>) -> String {
    match label {
        Some(k) => k.to_string(),
        None => NOISE_LABEL.to_string(),
    }
}

/// Writes `id,label` rows. Rows come out in ascending id order wherever that
/// agrees with each cluster's internal order, so members of a cluster always
/// appear in cluster order.
pub fn write_clustering(clustering: &Clustering, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = csv::Writer::from_writer(file);
    write_clustering_to(clustering, &mut writer)?;
    writer.flush()?;
    Ok(())
}

fn write_clustering_to<W: Write>(
    clustering: &Clustering,
    writer: &mut csv::Writer<W>,
) -> Result<()> {
    writer.write_record(["id", "label"])?;
    // k-way merge over the clusters and the sorted noise set
    let noise: Vec<ObservationId> = clustering.noise.iter().copied().collect();
    let mut queues: Vec<(&[ObservationId], Option<usize>)> = clustering
        .clusters
        .iter()
        .enumerate()
        .map(|(k, c)| (c.as_slice(), Some(k)))
        .collect();
    queues.push((&noise, None));
    loop {
        let next = queues
            .iter()
            .enumerate()
            .filter(|(_, (q, _))| !q.is_empty())
            .min_by_key(|(_, (q, _))| q[0])
            .map(|(i, _)| i);
        let Some(i) = next else { break };
        let (queue, label) = &mut queues[i];
        writer.write_record([queue[0].to_string(), label_text(*label)])?;
        *queue = &queue[1..];
    }
    Ok(())
}

/// Reads a clustering file. Cluster members keep their row order.
pub fn read_clustering(path: impl AsRef<Path>) -> Result<Clustering> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(parse_err(path, 1, "header must be `id,label`"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let id: ObservationId = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad id {:?}", &record[0])))?;
        rows.push((id, parse_label(path, line, &record[1])?));
    }
    group_labels(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn reads_simple_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.csv", "id,time,x0\n0,0.0,5.0\n1,1.0,3.0\n");
        let events = read_events(&p).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events.dimension(), 1);
        assert_eq!(events.observations()[1].state, vec![3.0]);
    }

    #[test]
    fn empty_body_is_empty_set() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.csv", "id,time,x0,x1\n");
        let events = read_events(&p).unwrap();
        assert!(events.is_empty());
        assert_eq!(events.dimension(), 2);
    }

    #[test]
    fn rows_are_sorted_by_time_then_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "e.csv",
            "id,time,x0\n5,2.0,0\n3,1.0,0\n4,1.0,0\n0,0.5,0\n",
        );
        let events = read_events(&p).unwrap();
        let ids: Vec<_> = events.ids().collect();
        assert_eq!(ids, vec![0, 3, 4, 5]);
    }

    #[test]
    fn parse_error_carries_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.csv", "id,time,x0\n0,0.0,1\n1,abc,2\n");
        match read_events(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.csv", "id,time,x0\n0,0.0,1\n0,1.0,2\n");
        assert!(matches!(read_events(&p), Err(Error::DuplicateId(0))));
    }

    #[test]
    fn inconsistent_dimension_rejected() {
        let obs = vec![
            Observation::new(0, 0.0, vec![1.0]),
            Observation::new(1, 1.0, vec![1.0, 2.0]),
        ];
        assert!(matches!(
            EventSet::from_observations(obs),
            Err(Error::DimensionMismatch { id: 1, .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.csv", "id,time,x0\n0,0.0,1\n1,1.0,2,3\n");
        assert!(read_events(&p).is_err());
    }

    #[test]
    fn truth_column_is_grouped_in_time_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "e.csv",
            "id,time,x0,truth\n2,3.0,0,0\n0,1.0,0,0\n1,2.0,0,noise\n3,0.5,0,1\n",
        );
        let (events, truth) = read_events_with_truth(&p).unwrap();
        let truth = truth.unwrap();
        assert_eq!(truth.clusters(), &[vec![0, 2], vec![3]]);
        assert!(truth.noise().contains(&1));
        truth.validate(&events).unwrap();
    }

    #[test]
    fn clustering_rows_in_id_order() {
        let c = Clustering::new(vec![vec![0, 2]], [1]).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        write_clustering_to(&c, &mut w).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text, "id,label\n0,0\n1,noise\n2,0\n");

        let c = Clustering::new(vec![], [0]).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        write_clustering_to(&c, &mut w).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text, "id,label\n0,noise\n");
    }

    #[test]
    fn clustering_rejects_overlap() {
        assert!(Clustering::new(vec![vec![0, 1], vec![1]], []).is_err());
        assert!(Clustering::new(vec![vec![0]], [0]).is_err());
        assert!(Clustering::new(vec![vec![]], [0]).is_err());
    }

    #[test]
    fn validate_checks_time_order_and_coverage() {
        let events = EventSet::from_observations(vec![
            Observation::new(0, 0.0, vec![0.0]),
            Observation::new(1, 1.0, vec![0.0]),
            Observation::new(2, 1.0, vec![0.0]),
        ])
        .unwrap();
        Clustering::new(vec![vec![0, 1]], [2]).unwrap().validate(&events).unwrap();
        // reversed order
        assert!(Clustering::new(vec![vec![1, 0]], [2]).unwrap().validate(&events).is_err());
        // equal times may not chain
        assert!(Clustering::new(vec![vec![1, 2]], [0]).unwrap().validate(&events).is_err());
        // missing id
        assert!(Clustering::new(vec![vec![0, 1]], []).unwrap().validate(&events).is_err());
    }

    fn arb_clustering() -> impl Strategy<Value = Clustering> {
        // random permutation of 0..n, cut into pieces; the last piece is noise
        (1usize..30)
            .prop_flat_map(|n| {
                (
                    Just((0..n as u64).collect::<Vec<_>>()).prop_shuffle(),
                    proptest::collection::vec(0usize..5, n),
                )
            })
            .prop_map(|(ids, tags)| {
                let mut groups: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
                for (id, tag) in ids.into_iter().zip(tags) {
                    groups.entry(tag).or_default().push(id);
                }
                let noise = groups.remove(&0).unwrap_or_default();
                Clustering::new(groups.into_values().collect(), noise).unwrap()
            })
    }

    proptest! {
        #[test]
        fn clustering_file_round_trip(c in arb_clustering()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("c.csv");
            write_clustering(&c, &p).unwrap();
            prop_assert_eq!(read_clustering(&p).unwrap(), c);
        }

        #[test]
        fn event_file_round_trip(
            rows in proptest::collection::vec((-1e3f64..1e3, -50f64..50.0, -50f64..50.0), 0..40),
            noise_mask in proptest::collection::vec(any::<bool>(), 40),
        ) {
            let obs: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(i, &(t, a, b))| Observation::new(i as u64 * 3 + 1, t, vec![a, b]))
                .collect();
            let events = EventSet::new(obs, 2).unwrap();
            // one chain of the non-noise ids in time order
            let (signal, noise): (Vec<_>, Vec<_>) = events
                .ids()
                .enumerate()
                .partition(|(i, _)| !noise_mask[*i]);
            let chain: Vec<u64> = signal.into_iter().map(|(_, id)| id).collect();
            let clusters = if chain.is_empty() { vec![] } else { vec![chain] };
            let truth = Clustering::new(clusters, noise.into_iter().map(|(_, id)| id)).unwrap();

            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("e.csv");
            write_events(&events, Some(&truth), &p).unwrap();
            let (back, back_truth) = read_events_with_truth(&p).unwrap();
            prop_assert_eq!(&back, &events);
            prop_assert_eq!(back_truth.unwrap(), truth);
        }
    }
}
