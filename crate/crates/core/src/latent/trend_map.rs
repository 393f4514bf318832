//! Scatter of the reduced latent space with feature gradient arrows, as SVG
//! plus a CSV carrying the same content.

use std::fmt::Write as _;
use std::path::Path;

use super::trend::{join_rows, TrendModel};
use super::Projection;
use crate::error::{Error, Result};
use crate::table::{EmbeddingSet, FeatureTable};

#[derive(Debug, Clone, PartialEq)]
pub struct TrendMapPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendMapArrow {
    pub feature: String,
    /// Arrow origin (centroid of the projected points).
    pub origin: [f64; 2],
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub apcc: Option<f64>,
    pub gradient: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendMapData {
    pub color_feature: String,
    pub points: Vec<TrendMapPoint>,
    pub arrows: Vec<TrendMapArrow>,
}

const DATA_HEADER: [&str; 11] = ["kind", "name", "x", "y", "value", "a", "b", "c", "apcc", "gx", "gy"];

const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the trend map. Points are every embedding; their color is the
/// value of `color_feature` (grey when missing). One arrow per trend starts
/// at the centroid and follows the trend's gradient; the CSV always holds one
/// arrow row per trend, while flat trends are not drawn.
pub fn export_trend_map(
    projection: &Projection,
    embeddings: &EmbeddingSet,
    features: &FeatureTable,
    trends: &[TrendModel],
    color_feature: &str,
    svg_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<TrendMapData> {
    let col = features
        .feature_index(color_feature)
        .ok_or_else(|| Error::UnknownFeature(color_feature.to_string()))?;
    if embeddings.is_empty() {
        return Err(Error::NotEnoughData("no embeddings to plot".into()));
    }

    let mut values: Vec<Option<f64>> = vec![None; embeddings.len()];
    for (e, f) in join_rows(embeddings, features) {
        values[e] = features.get(f, col);
    }
    let points: Vec<TrendMapPoint> = embeddings
        .ids()
        .iter()
        .zip(embeddings.vectors())
        .zip(values)
        .map(|((id, v), value)| {
            let [x, y] = projection.project(v)?;
            Ok(TrendMapPoint {
                id: id.clone(),
                x,
                y,
                value,
            })
        })
        .collect::<Result<_>>()?;

    let n = points.len() as f64;
    let origin = [
        points.iter().map(|p| p.x).sum::<f64>() / n,
        points.iter().map(|p| p.y).sum::<f64>() / n,
    ];
    let arrows: Vec<TrendMapArrow> = trends
        .iter()
        .map(|t| TrendMapArrow {
            feature: t.feature.clone(),
            origin,
            a: t.a,
            b: t.b,
            c: t.c,
            apcc: t.apcc,
            gradient: t.gradient,
        })
        .collect();

    let data = TrendMapData {
        color_feature: color_feature.to_string(),
        points,
        arrows,
    };
    write_data(&data, data_path.as_ref())?;
    let svg_path = svg_path.as_ref();
    std::fs::write(svg_path, render_svg(&data)).map_err(|e| Error::io(svg_path, e))?;
    Ok(data)
}

fn write_data(data: &TrendMapData, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# color_feature={}", data.color_feature).unwrap();
    writeln!(out, "{}", DATA_HEADER.join(",")).unwrap();
    for p in &data.points {
        writeln!(out, "point,{},{},{},{},,,,,,", p.id, p.x, p.y, opt(p.value)).unwrap();
    }
    for a in &data.arrows {
        writeln!(
            out,
            "arrow,{},{},{},,{},{},{},{},{},{}",
            a.feature,
            a.origin[0],
            a.origin[1],
            a.a,
            a.b,
            a.c,
            opt(a.apcc),
            opt(a.gradient.map(|g| g[0])),
            opt(a.gradient.map(|g| g[1])),
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a data file written by [`export_trend_map`].
pub fn read_trend_map_data(path: impl AsRef<Path>) -> Result<TrendMapData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let color_feature = lines
        .next()
        .and_then(|l| l.strip_prefix("# color_feature="))
        .ok_or_else(|| Error::Table("missing color_feature line".into()))?
        .to_string();
    if lines.next() != Some(DATA_HEADER.join(",").as_str()) {
        return Err(Error::Table("unexpected trend map header".into()));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Table(format!("bad number `{s}`")))
    };
    let opt_num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };

    let mut points = Vec::new();
    let mut arrows = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != DATA_HEADER.len() {
            return Err(Error::Table(format!("ragged trend map row `{line}`")));
        }
        match cells[0] {
            "point" => points.push(TrendMapPoint {
                id: cells[1].to_string(),
                x: num(cells[2])?,
                y: num(cells[3])?,
                value: opt_num(cells[4])?,
            }),
            "arrow" => {
                let gradient = match (opt_num(cells[9])?, opt_num(cells[10])?) {
                    (Some(x), Some(y)) => Some([x, y]),
                    _ => None,
                };
                arrows.push(TrendMapArrow {
                    feature: cells[1].to_string(),
                    origin: [num(cells[2])?, num(cells[3])?],
                    a: num(cells[5])?,
                    b: num(cells[6])?,
                    c: num(cells[7])?,
                    apcc: opt_num(cells[8])?,
                    gradient,
                })
            }
            other => return Err(Error::Table(format!("unknown row kind `{other}`"))),
        }
    }
    Ok(TrendMapData {
        color_feature,
        points,
        arrows,
    })
}

fn render_svg(data: &TrendMapData) -> String {
    const SIZE: f64 = 640.0;
    const MARGIN: f64 = 40.0;

    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &data.points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    // equal aspect so arrow directions are not distorted
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let px = |x: f64| MARGIN + (x - x0) * scale;
    let py = |y: f64| SIZE - MARGIN - (y - y0) * scale;

    let (vmin, vmax) = data
        .points
        .iter()
        .filter_map(|p| p.value)
        .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    s.push_str(
        r##"<defs><marker id="head" markerWidth="8" markerHeight="8" refX="6" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#1f4fd1"/></marker></defs>"##,
    );
    s.push('\n');
    writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">color: {}</text>"#,
        xml_escape(&data.color_feature)
    )
    .unwrap();

    s.push_str("<g id=\"points\">\n");
    for p in &data.points {
        let fill = match p.value {
            Some(v) if vmax > vmin => ramp((v - vmin) / (vmax - vmin)),
            Some(_) => ramp(0.5),
            None => "#bbbbbb".to_string(),
        };
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}"><title>{}</title></circle>"#,
            px(p.x),
            py(p.y),
            xml_escape(&p.id)
        )
        .unwrap();
    }
    s.push_str("</g>\n<g id=\"arrows\">\n");

    let length = 0.25 * span;
    for a in &data.arrows {
        let Some(g) = a.gradient else { continue };
        let (sx, sy) = (px(a.origin[0]), py(a.origin[1]));
        let (ex, ey) = (
            px(a.origin[0] + g[0] * length),
            py(a.origin[1] + g[1] * length),
        );
        writeln!(
            s,
            r##"<line x1="{sx:.2}" y1="{sy:.2}" x2="{ex:.2}" y2="{ey:.2}" stroke="#1f4fd1" stroke-width="2" marker-end="url(#head)"/>"##
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            ex + 4.0,
            ey - 4.0,
            xml_escape(&a.feature)
        )
        .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{fit_pca, fit_trend};

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(xml_escape("a<b&\"c\">"), "a&lt;b&amp;&quot;c&quot;&gt;");
    }

    #[test]
    fn unknown_color_feature() {
        let emb = EmbeddingSet::new(
            (0..4).map(|i| format!("u{i}")).collect(),
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.5],
            ],
        )
        .unwrap();
        let proj = fit_pca(&emb).unwrap();
        let table = FeatureTable::new(
            emb.ids().to_vec(),
            vec!["f".into()],
            vec![vec![Some(1.0)]; 4],
        )
        .unwrap();
        let pts = proj.project_all(&emb).unwrap();
        let t = fit_trend(&pts, &[Some(0.0), Some(1.0), Some(2.0), Some(4.0)], "f").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let res = export_trend_map(
            &proj,
            &emb,
            &table,
            &[t],
            "nope",
            dir.path().join("m.svg"),
            dir.path().join("m.csv"),
        );
        assert!(matches!(res, Err(Error::UnknownFeature(_))));
    }
}
