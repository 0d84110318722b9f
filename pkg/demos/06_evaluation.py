"""
Self-play evaluation
====================

The bundled scripted fixture plays 2 topics x 5 sessions: the agent and a
simulated talker converse, the judge grades every response and suggestion,
and the detector decides natural endings. One response error and one
suggestion error are planted at known positions, so the report is fully
predictable: 8 of 10 sessions succeed.
"""

from situdial import (
    classifier_metrics,
    load_bundled_eval_config,
    render_report_table,
    run_evaluation,
)

report = run_evaluation(load_bundled_eval_config())
print(render_report_table(report))

counts = report.overall["counts"]
print(f"\nresponses   {counts['correct_responses']}/{counts['responses']}")
print(f"suggestions {counts['correct_suggestions']}/{counts['suggestions']}")
print(f"sessions    {counts['successful_sessions']}/{counts['sessions']}")

# Two runs with the same config and seed are byte-identical.
again = run_evaluation(load_bundled_eval_config())
print("\nreproducible:", again.to_json_bytes() == report.to_json_bytes())

# Classifier metrics for detector/judge experiments follow the usual
# confusion-matrix definitions.
labels = [True] * 90 + [False] * 10
predictions = [True] * 85 + [False] * 5 + [False] * 8 + [True] * 2
print("\nclassifier metrics:", classifier_metrics(labels, predictions))
