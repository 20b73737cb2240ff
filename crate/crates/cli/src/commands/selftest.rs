//! `selftest`: run the bundled synthetic-scene oracle suite and print one
//! pass/fail line per check.

use anyhow::Result;
use nalgebra::Vector3;
use navgeom::camera::plucker_embed;
use navgeom::cloud::cloud_from_depth;
use navgeom::config::PipelineConfig;
use navgeom::evalsim::{evaluate_batch, oracle_policy, run_episode, RunOptions};
use navgeom::pose::Pose;
use navgeom::reproject::{reproject_cloud, ReprojectOptions};
use navgeom::synthetic;

pub fn run(seed: u64) -> Result<bool> {
    let mut all_ok = true;
    let mut check = |name: &str, outcome: Result<String>| match outcome {
        Ok(detail) => println!("[PASS] {name}: {detail}"),
        Err(err) => {
            all_ok = false;
            println!("[FAIL] {name}: {err:#}");
        }
    };

    let config = PipelineConfig::default();
    let scene = synthetic::scene(seed, 192, 144);

    check("annotate endpoint anchors to target cell", {
        synthetic::annotate_scene(&scene, &config)
            .map_err(anyhow::Error::from)
            .and_then(|out| {
                let (grid, traj, anchored) =
                    out.ok_or_else(|| anyhow::anyhow!("synthetic scene was unplannable"))?;
                let last = traj.poses.last().unwrap();
                let (tx, tz) = grid.center_of(anchored);
                let gap = (last.x - tx).hypot(last.z - tz);
                if gap < 1e-9 {
                    Ok(format!("endpoint gap {gap:.1e} m"))
                } else {
                    Err(anyhow::anyhow!("endpoint {gap} m from anchored cell"))
                }
            })
    });

    check("identity reprojection reproduces depth", {
        (|| {
            let cloud = cloud_from_depth(&scene.depth, &scene.camera, 1)?;
            let frames = reproject_cloud(
                &cloud,
                &scene.camera,
                &[Pose::identity()],
                None,
                &ReprojectOptions::default(),
            )?;
            let mut max_err = 0.0f64;
            for row in 0..scene.depth.height {
                for col in 0..scene.depth.width {
                    let src = scene.depth.at(col, row) as f64;
                    if src > 0.0 {
                        max_err = max_err.max((frames[0].depth_at(col, row) - src).abs());
                    }
                }
            }
            if max_err < 1e-6 {
                Ok(format!("max depth error {max_err:.1e} m"))
            } else {
                Err(anyhow::anyhow!("max depth error {max_err} m"))
            }
        })()
    });

    check("ray map satisfies unit-direction and moment identities", {
        (|| {
            let map = plucker_embed(&scene.camera);
            for ray in &map.rays {
                let d = Vector3::new(ray[0], ray[1], ray[2]);
                let m = Vector3::new(ray[3], ray[4], ray[5]);
                if (d.norm() - 1.0).abs() > 1e-9 || d.dot(&m).abs() > 1e-9 {
                    return Err(anyhow::anyhow!("ray invariant violated"));
                }
            }
            Ok(format!("{} rays checked", map.rays.len()))
        })()
    });

    check("oracle policy solves the bundled episode suite", {
        (|| {
            let episodes = synthetic::episode_suite(20, seed);
            let rollouts = episodes
                .iter()
                .map(|ep| {
                    let mut policy = oracle_policy(ep);
                    run_episode(ep, &mut policy, seed, &RunOptions::default())
                })
                .collect::<navgeom::Result<Vec<_>>>()?;
            let report = evaluate_batch(&episodes, &rollouts, 100)?;
            if report.sr_030 == 1.0 && report.tr_mean < 0.05 {
                Ok(format!(
                    "SR(0.3) = {:.2}, TR(mean) = {:.4} m over {} episodes",
                    report.sr_030, report.tr_mean, report.episode_count
                ))
            } else {
                Err(anyhow::anyhow!(
                    "SR(0.3) = {}, TR(mean) = {}",
                    report.sr_030,
                    report.tr_mean
                ))
            }
        })()
    });

    Ok(all_ok)
}
