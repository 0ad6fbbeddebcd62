//! Export a solution as GeoJSON point features or CSV.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use territory_core::instance::Instance;
use territory_core::solution::Solution;

use crate::ExportFormat;

pub fn run(solution: &Path, instance: &Path, format: ExportFormat, out: &Path) -> Result<()> {
    let solution = Solution::load(solution)
        .with_context(|| format!("loading {}", solution.display()))?;
    let instance = Instance::load(instance)
        .with_context(|| format!("loading {}", instance.display()))?;
    if solution.assignment.len() != instance.n() {
        bail!(
            "solution has {} assignments but the instance has {} areas",
            solution.assignment.len(),
            instance.n()
        );
    }
    let text = match format {
        ExportFormat::Geojson => to_geojson(&solution, &instance),
        ExportFormat::Csv => to_csv(&solution, &instance),
    };
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn to_geojson(solution: &Solution, instance: &Instance) -> String {
    let features: Vec<serde_json::Value> = instance
        .areas()
        .iter()
        .map(|area| {
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [area.x, area.y],
                },
                "properties": {
                    "id": area.id,
                    "activity": area.activity,
                    "territory": solution.assignment[area.id],
                },
            })
        })
        .collect();
    let doc = json!({
        "type": "FeatureCollection",
        "features": features,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("geojson serializes");
    text.push('\n');
    text
}

fn to_csv(solution: &Solution, instance: &Instance) -> String {
    let mut out = String::from("id,x,y,activity,territory\n");
    for area in instance.areas() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            area.id, area.x, area.y, area.activity, solution.assignment[area.id]
        ));
    }
    out
}
