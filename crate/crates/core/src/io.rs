//! File plumbing shared by the stages: transparent decompression, atomic
//! output files and content hashes.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use bzip2::read::MultiBzDecoder;
use flate2::read::MultiGzDecoder;
use sha2::{Digest, Sha256};

const GZIP_MAGIC: &[u8] = &[0x1f, 0x8b];
const BZIP2_MAGIC: &[u8] = b"BZh";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Gzip,
    Bzip2,
}

/// Sniff the compression format from the first bytes of a buffered reader.
pub fn sniff_compression<R: BufRead>(reader: &mut R) -> io::Result<Compression> {
    let head = reader.fill_buf()?;
    Ok(if head.starts_with(GZIP_MAGIC) {
        Compression::Gzip
    } else if head.starts_with(BZIP2_MAGIC) {
        Compression::Bzip2
    } else {
        Compression::None
    })
}

/// Wrap a byte stream so gzip or bzip2 input is decompressed transparently.
pub fn decompressing<R: Read + Send + 'static>(reader: R) -> io::Result<Box<dyn BufRead + Send>> {
    let mut buffered = BufReader::with_capacity(1 << 16, reader);
    Ok(match sniff_compression(&mut buffered)? {
        Compression::None => Box::new(buffered),
        Compression::Gzip => Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(buffered))),
        Compression::Bzip2 => Box::new(BufReader::with_capacity(1 << 16, MultiBzDecoder::new(buffered))),
    })
}

/// Open a (possibly compressed) input file; `-` reads standard input.
pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    if path.as_os_str() == "-" {
        decompressing(io::stdin())
    } else {
        decompressing(File::open(path)?)
    }
}

/// A file written under a temporary name and renamed into place on commit.
/// Dropping without committing removes the temporary file.
pub struct AtomicFile {
    target: PathBuf,
    temp: PathBuf,
    writer: Option<BufWriter<File>>,
}

impl AtomicFile {
    pub fn create(target: impl AsRef<Path>) -> io::Result<Self> {
        let target = target.as_ref().to_path_buf();
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut name = target
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(format!(".tmp-{}", std::process::id()));
        let temp = target.with_file_name(name);
        let writer = BufWriter::with_capacity(1 << 16, File::create(&temp)?);
        Ok(AtomicFile {
            target,
            temp,
            writer: Some(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.target
    }

    /// Where the bytes live until [`AtomicFile::commit`].
    pub fn temp_path(&self) -> &Path {
        &self.temp
    }

    pub fn commit(mut self) -> io::Result<PathBuf> {
        let writer = self.writer.take().expect("writer present until commit");
        let file = writer.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&self.temp, &self.target)?;
        Ok(self.target.clone())
    }
}

impl Write for AtomicFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.writer.as_mut().expect("not committed").write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.writer.as_mut().expect("not committed").flush()
    }
}

impl Drop for AtomicFile {
    fn drop(&mut self) {
        if self.writer.take().is_some() {
            let _ = fs::remove_file(&self.temp);
        }
    }
}

/// Write a whole file atomically.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> io::Result<()> {
    let mut file = AtomicFile::create(path)?;
    file.write_all(contents)?;
    file.commit().map(|_| ())
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Replace TAB, CR and LF with single spaces. Returns whether anything changed.
pub fn sanitize_field(field: &str) -> (std::borrow::Cow<'_, str>, bool) {
    if field.contains(['\t', '\n', '\r']) {
        (field.replace(['\t', '\n', '\r'], " ").into(), true)
    } else {
        (field.into(), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gzip_and_bzip2_are_transparent() {
        let plain = b"{\"id\":\"Q1\"}\n".to_vec();

        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all(&plain).unwrap();
        let gz = gz.finish().unwrap();

        let mut bz = bzip2::write::BzEncoder::new(Vec::new(), bzip2::Compression::default());
        bz.write_all(&plain).unwrap();
        let bz = bz.finish().unwrap();

        for bytes in [plain.clone(), gz, bz] {
            let mut out = Vec::new();
            decompressing(io::Cursor::new(bytes))
                .unwrap()
                .read_to_end(&mut out)
                .unwrap();
            assert_eq!(out, plain);
        }
    }

    #[test]
    fn atomic_file_only_appears_on_commit() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.tsv");
        {
            let mut f = AtomicFile::create(&target).unwrap();
            f.write_all(b"abandoned").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

        let mut f = AtomicFile::create(&target).unwrap();
        f.write_all(b"kept").unwrap();
        f.commit().unwrap();
        assert_eq!(fs::read(&target).unwrap(), b"kept");
    }

    #[test]
    fn sanitize_replaces_tabs_and_newlines() {
        assert_eq!(sanitize_field("a\tb\nc").0, "a b c");
        assert!(!sanitize_field("plain").1);
    }
}
