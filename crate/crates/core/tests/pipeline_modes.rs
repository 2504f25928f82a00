mod common;

use common::{max_abs_diff, synthetic_content, synthetic_style};
use stylecolor::affine_transfer::{apply_affine_map_unclamped, Variant};
use stylecolor::colorstats::{compute_color_stats, compute_scalar_stats, stats_of_planes};
use stylecolor::luminance::{match_luminance, rgb_to_yiq};
use stylecolor::pipeline::{run_images, Mode, PipelineConfig};
use stylecolor::StylerSpec;

fn cfg(mode: Mode, styler: StylerSpec) -> PipelineConfig {
    PipelineConfig::new("c.png", "s.png", "o.png")
        .with_mode(mode)
        .with_styler(styler)
}

#[test]
fn color_pre_full_blend_outputs_matched_style() {
    let content = synthetic_content(96, 80);
    let style = synthetic_style(96, 80);
    for variant in Variant::ALL {
        let config = cfg(Mode::ColorPre, StylerSpec::blend(1.0).unwrap()).with_variant(variant);
        let out = run_images(&config, &content, &style).unwrap();
        let report = &out.report;
        let map = report.map.unwrap().map;

        // output is S' exactly
        let planes = apply_affine_map_unclamped(&style, &map).unwrap();
        for c in 0..3 {
            let clamped: Vec<f64> = planes[c].iter().map(|v| v.clamp(0.0, 1.0)).collect();
            assert_eq!(out.image.plane(c), &clamped[..]);
        }

        // pre-clamp stats of S' equal the content stats
        let pre = stats_of_planes([&planes[0], &planes[1], &planes[2]]).unwrap();
        let target = compute_color_stats(&content).unwrap();
        assert!((pre.mean - target.mean).norm() < 1e-6, "{variant}");
        assert!(
            (pre.cov.to_mat3() - target.cov.to_mat3()).frobenius() < 1e-6,
            "{variant}"
        );
        assert_eq!(report.matched_stats.unwrap(), pre);
    }
}

#[test]
fn color_post_half_blend_matches_content_stats() {
    let content = synthetic_content(80, 64);
    let style = synthetic_style(120, 90);
    let config = cfg(Mode::ColorPost, StylerSpec::blend(0.5).unwrap());
    let out = run_images(&config, &content, &style).unwrap();
    let pre = out.report.matched_stats.unwrap();
    let target = compute_color_stats(&content).unwrap();
    assert!((pre.mean - target.mean).norm() < 1e-6);
    assert!((pre.cov.to_mat3() - target.cov.to_mat3()).frobenius() < 1e-6);
    // exactly one solved map, solved against the styled image
    let map = out.report.map.expect("one map");
    assert!(map.residuals.within_tolerance());
    assert_eq!(out.report.styled_stats.unwrap().n, content.len());
}

#[test]
fn luminance_full_blend_with_matching() {
    let content = synthetic_content(96, 80);
    let style = synthetic_style(96, 80);
    let config = cfg(Mode::Luminance, StylerSpec::blend(1.0).unwrap()).with_lum_match(true);
    let out = run_images(&config, &content, &style).unwrap();

    let content_yiq = rgb_to_yiq(&content);
    let style_yiq = rgb_to_yiq(&style);
    let matched = match_luminance(
        &style_yiq.y,
        compute_scalar_stats(&content_yiq.y).unwrap(),
        compute_scalar_stats(&style_yiq.y).unwrap(),
    )
    .unwrap();

    let out_yiq = rgb_to_yiq(&out.image);
    let unclamped = stylecolor::luminance::yiq_to_rgb_unclamped(
        &stylecolor::luminance::YiqImage::new(
            content.width(),
            content.height(),
            matched.clone(),
            content_yiq.i.clone(),
            content_yiq.q.clone(),
        )
        .unwrap(),
    );
    let mut in_gamut = 0;
    for k in 0..content.len() {
        if unclamped.iter().all(|p| (0.0..=1.0).contains(&p[k])) {
            in_gamut += 1;
            assert!((out_yiq.y[k] - matched[k]).abs() < 1e-6);
            assert!((out_yiq.i[k] - content_yiq.i[k]).abs() < 1e-6);
            assert!((out_yiq.q[k] - content_yiq.q[k]).abs() < 1e-6);
        }
    }
    assert!(in_gamut as f64 > 0.9 * content.len() as f64);
    let reported = out.report.clamped_fraction;
    assert!((reported - (1.0 - in_gamut as f64 / content.len() as f64)).abs() < 1e-12);

    let lum = out.report.luminance.unwrap();
    let m = lum.matched_style.unwrap();
    assert!((m.mean - lum.content.mean).abs() < 1e-10);
    assert!((m.std - lum.content.std).abs() < 1e-10);
}

#[test]
fn outputs_move_toward_content_colors() {
    let content = synthetic_content(64, 64);
    let style = synthetic_style(64, 64);
    let mu_c = compute_color_stats(&content).unwrap().mean;
    let mu_s = compute_color_stats(&style).unwrap().mean;
    let stylers = [
        StylerSpec::Identity,
        StylerSpec::blend(0.3).unwrap(),
        StylerSpec::blend(0.7).unwrap(),
        StylerSpec::blend(1.0).unwrap(),
    ];
    for mode in [Mode::ColorPre, Mode::ColorPost, Mode::Luminance] {
        for styler in &stylers {
            let out = run_images(&cfg(mode, styler.clone()), &content, &style).unwrap();
            let mu_out = compute_color_stats(&out.image).unwrap().mean;
            assert!(
                (mu_out - mu_c).norm() <= (mu_s - mu_c).norm(),
                "{mode} {styler:?}"
            );
            if let Some(pre) = out.report.matched_stats {
                let target = out.report.content_stats;
                assert!((pre.mean - target.mean).norm() < 1e-6);
                assert!((pre.cov.to_mat3() - target.cov.to_mat3()).frobenius() < 1e-6);
            }
            if let Some(map) = out.report.map {
                assert!(map.residuals.within_tolerance());
                assert!(out.report.warnings.is_empty(), "{:?}", out.report.warnings);
            }
        }
    }
}

#[test]
fn in_memory_runs_are_deterministic_across_thread_counts() {
    let content = synthetic_content(128, 96);
    let style = synthetic_style(100, 100);
    for mode in [Mode::ColorPre, Mode::ColorPost, Mode::Luminance] {
        let config = cfg(mode, StylerSpec::blend(0.6).unwrap());
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_images(&config, &content, &style).unwrap())
        };
        let (a, b) = (run(1), run(8));
        assert_eq!(a.image, b.image);
        let strip = |mut r: stylecolor::RunReport| {
            r.timings.clear();
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(strip(a.report), strip(b.report));
        assert_eq!(max_abs_diff(a.image.plane(0), b.image.plane(0)), 0.0);
    }
}
