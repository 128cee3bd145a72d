mod common;

use common::{evaluate_fixture, oracle, APPS};

#[test]
fn per_target_tiers_and_behavior_match_oracle_sheets() {
    for app in APPS {
        let eval = evaluate_fixture(app);
        let sheet = oracle(app);
        assert_eq!(eval.report.task_name, sheet.task_name);
        assert_eq!(eval.report.per_annotation.len(), sheet.targets.len(), "{app}");
        for r in &eval.report.per_annotation {
            let want = &sheet.targets[&r.target_id];
            assert_eq!(r.tier_name.name(), want.tier, "{app}/{}: {}", r.target_id, r.diagnostics);
            assert_eq!(r.l, want.l, "{app}/{}", r.target_id);
            assert_eq!(r.b, want.b, "{app}/{}: {}", r.target_id, r.diagnostics);
        }
        assert_eq!(eval.unresolved, sheet.unresolved, "{app}");
    }
}

#[test]
fn aggregates_match_oracle_sheets() {
    for app in APPS {
        let agg = evaluate_fixture(app).report.aggregate;
        let sheet = oracle(app);
        assert!((agg.s - sheet.s).abs() < 1e-9, "{app}: S {} vs {}", agg.s, sheet.s);
        assert!((agg.mean_l - sheet.mean_l).abs() < 1e-9, "{app}");
        assert!((agg.mean_b - sheet.mean_b).abs() < 1e-9, "{app}");
    }
}

#[test]
fn outlier_anchor_is_trimmed_on_kanban_board() {
    let eval = evaluate_fixture("kanban");
    let board = eval.report.per_page.iter().find(|p| p.page_id == "board").unwrap();
    let t = board.transform.unwrap();
    assert!((t.s_x - 0.75).abs() < 1e-9 && (t.s_y - 0.75).abs() < 1e-9, "{t:?}");
    assert!((t.t_x - 20.0).abs() < 1e-9 && (t.t_y - 8.0).abs() < 1e-9, "{t:?}");
    assert_eq!(board.anchors_matched, 5);
}

#[test]
fn single_anchor_falls_back_to_translation() {
    let eval = evaluate_fixture("kanban");
    let settings = eval.report.per_page.iter().find(|p| p.page_id == "settings").unwrap();
    let t = settings.transform.unwrap();
    assert_eq!((t.s_x, t.t_x, t.s_y, t.t_y), (1.0, -30.0, 1.0, 60.0));
    assert_eq!(settings.anchors_matched, 1);
}

#[test]
fn signature_resolution_picks_heading_match() {
    let eval = evaluate_fixture("kanban");
    let card = eval.report.per_page.iter().find(|p| p.page_id == "cards-detail").unwrap();
    assert_eq!(card.resolved_url.as_deref(), Some("http://kanban.test/cards/42"));
    assert!(card.resolution_confidence < 1.0 + 1e-12);
}

#[test]
fn unresolved_page_is_reported_as_partial() {
    let eval = evaluate_fixture("recipes");
    assert!(eval.is_partial());
    let admin = eval.report.per_page.iter().find(|p| p.page_id == "admin").unwrap();
    assert!(admin.resolved_url.is_none());
    assert!(admin.note.as_deref().unwrap().starts_with("PageUnresolved"));
    let recipe = eval.report.per_page.iter().find(|p| p.page_id == "recipe").unwrap();
    assert_eq!(recipe.resolved_url.as_deref(), Some("http://recipes.test/recipes/pasta"));
}

#[test]
fn overlays_are_rendered_when_screenshots_exist() {
    let eval = evaluate_fixture("bookshelf");
    assert_eq!(eval.overlays.len(), 2);
    assert_eq!(eval.report.overlay_refs, vec!["overlays/home.png", "overlays/catalog.png"]);
    let kanban = evaluate_fixture("kanban");
    assert!(kanban.overlays.is_empty());
    assert!(kanban.report.notes.iter().any(|n| n.contains("overlay skipped")));
}
