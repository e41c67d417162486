//! Binary GraphDataset files (`.x2g`): little-endian fixed-width header
//! (version, vocabulary, config flags, class names, KB name) followed by
//! per-graph records. Writing is deterministic, so equal datasets produce
//! byte-identical files.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::convert::{ConversionConfig, GraphDataset, SampleGraph};
use crate::error::{Result, X2gError};
use crate::kb::FeatureVocabulary;

const MAGIC: &[u8; 4] = b"X2G\x01";
const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r).map_err(io_fmt)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(io_fmt)?;
    String::from_utf8(buf).map_err(|e| X2gError::Format(format!("invalid utf8 string: {e}")))
}

fn io_fmt(e: std::io::Error) -> X2gError {
    X2gError::Format(format!("truncated or corrupt graph dataset: {e}"))
}

pub fn write_graph_dataset(gd: &GraphDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| X2gError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        w.write_all(MAGIC)?;
        write_u32(&mut w, VERSION)?;
        write_str(&mut w, &gd.kb_name)?;
        w.write_all(&[gd.config.node_pruning as u8, gd.config.id_indexing as u8])?;
        write_u32(&mut w, gd.class_names.len() as u32)?;
        for c in &gd.class_names {
            write_str(&mut w, c)?;
        }
        write_u32(&mut w, gd.vocabulary.len() as u32)?;
        for n in &gd.vocabulary.names {
            write_str(&mut w, n)?;
        }
        write_u64(&mut w, gd.graphs.len() as u64)?;
        for g in &gd.graphs {
            write_u32(&mut w, g.n_nodes() as u32)?;
            write_u32(&mut w, g.n_edges() as u32)?;
            write_u32(&mut w, g.label)?;
            for &j in &g.node_index {
                write_u32(&mut w, j)?;
            }
            for &v in &g.node_value {
                write_f64(&mut w, v)?;
            }
            for &(a, b) in &g.edges {
                write_u32(&mut w, a)?;
                write_u32(&mut w, b)?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| X2gError::io(path.display().to_string(), e))
}

pub fn read_graph_dataset(path: &Path) -> Result<GraphDataset> {
    let file =
        std::fs::File::open(path).map_err(|e| X2gError::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_fmt)?;
    if &magic != MAGIC {
        return Err(X2gError::Format(format!(
            "{}: not a graph dataset file",
            path.display()
        )));
    }
    let version = read_u32(&mut r).map_err(io_fmt)?;
    if version != VERSION {
        return Err(X2gError::Format(format!(
            "unsupported graph dataset version {version}"
        )));
    }
    let kb_name = read_str(&mut r)?;
    let mut flags = [0u8; 2];
    r.read_exact(&mut flags).map_err(io_fmt)?;
    let config = ConversionConfig {
        node_pruning: flags[0] != 0,
        id_indexing: flags[1] != 0,
    };
    let n_classes = read_u32(&mut r).map_err(io_fmt)? as usize;
    let class_names = (0..n_classes)
        .map(|_| read_str(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let vocab_len = read_u32(&mut r).map_err(io_fmt)? as usize;
    let names = (0..vocab_len)
        .map(|_| read_str(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let vocabulary = FeatureVocabulary::from_names(names.clone());
    if vocabulary.names != names {
        return Err(X2gError::Format(
            "vocabulary in file is not sorted/unique".into(),
        ));
    }
    let n_graphs = read_u64(&mut r).map_err(io_fmt)? as usize;
    let mut graphs = Vec::with_capacity(n_graphs);
    for _ in 0..n_graphs {
        let n_nodes = read_u32(&mut r).map_err(io_fmt)? as usize;
        let n_edges = read_u32(&mut r).map_err(io_fmt)? as usize;
        let label = read_u32(&mut r).map_err(io_fmt)?;
        let mut node_index = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            node_index.push(read_u32(&mut r).map_err(io_fmt)?);
        }
        let mut node_value = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            node_value.push(read_f64(&mut r).map_err(io_fmt)?);
        }
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let a = read_u32(&mut r).map_err(io_fmt)?;
            let b = read_u32(&mut r).map_err(io_fmt)?;
            edges.push((a, b));
        }
        graphs.push(SampleGraph {
            node_index,
            node_value,
            edges,
            label,
            vocab_size: vocab_len as u32,
        });
    }
    Ok(GraphDataset {
        vocabulary,
        graphs,
        class_names,
        config,
        kb_name,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::convert_table;
    use crate::kb::parse_edge_list;
    use crate::tabular::TabularDataset;

    fn sample_dataset() -> GraphDataset {
        let kb = parse_edge_list("g1\tg2\ng2\tg4\ng4\tg5\n", "fixture").unwrap();
        let ds = TabularDataset::from_numeric(
            vec!["g1".into(), "g2".into(), "g4".into()],
            vec![vec![0.0, 1.2, 3.3], vec![1.0, 0.0, -2.0]],
            vec![0, 1],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        convert_table(
            &ds,
            &kb,
            &ConversionConfig {
                node_pruning: true,
                id_indexing: true,
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_exact() {
        let gd = sample_dataset();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_graph_dataset(&gd, tmp.path()).unwrap();
        let back = read_graph_dataset(tmp.path()).unwrap();
        assert_eq!(back, gd);
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let gd = sample_dataset();
        let t1 = tempfile::NamedTempFile::new().unwrap();
        let t2 = tempfile::NamedTempFile::new().unwrap();
        write_graph_dataset(&gd, t1.path()).unwrap();
        write_graph_dataset(&gd, t2.path()).unwrap();
        assert_eq!(
            std::fs::read(t1.path()).unwrap(),
            std::fs::read(t2.path()).unwrap()
        );
    }

    #[test]
    fn bad_magic_rejected() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), b"nope").unwrap();
        assert!(read_graph_dataset(tmp.path()).is_err());
    }
}
