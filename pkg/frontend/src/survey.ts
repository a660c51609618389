// Survey form model and summary-table rendering in the published
// percentage-table layout: category rows, question counts, five
// satisfaction columns at two decimals.

import type { Questionnaire, SurveySummary } from "./types.js";

export const LEVELS = [
  "very_satisfied",
  "satisfied",
  "neutral",
  "unsatisfied",
  "very_unsatisfied",
] as const;

export const LEVEL_LABELS: Record<(typeof LEVELS)[number], string> = {
  very_satisfied: "Very Satisfied",
  satisfied: "Satisfied",
  neutral: "Neutral",
  unsatisfied: "Unsatisfied",
  very_unsatisfied: "Very Unsatisfied",
};

export function allQuestionIds(q: Questionnaire): string[] {
  return q.categories.flatMap((c) => c.questions);
}

export function missingAnswers(
  q: Questionnaire,
  answers: Record<string, string>,
): string[] {
  return allQuestionIds(q).filter((qid) => !answers[qid]);
}

export function canSubmit(q: Questionnaire, answers: Record<string, string>): boolean {
  return missingAnswers(q, answers).length === 0;
}

export function formatPercent(value: number): string {
  return `${value.toFixed(2)}%`;
}

export const TABLE_HEADER = [
  "Type of Questions",
  "Number of Questions",
  ...LEVELS.map((level) => LEVEL_LABELS[level]),
];

/** Rows in table order; empty summary renders header only. */
export function summaryRows(summary: SurveySummary | null): string[][] {
  if (!summary) return [];
  return summary.categories.map((category) => [
    category.name,
    String(category.question_count),
    ...LEVELS.map((level) => formatPercent(category.percents[level] ?? 0)),
  ]);
}
