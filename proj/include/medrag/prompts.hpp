#pragma once

#include <string>

namespace medrag {

/// Prompt rendering for the four model roles. Templates keep a literal
/// {question_image} marker on the first line; the serving layer attaches the
/// actual image alongside the text. Renderers substitute only the documented
/// slots and leave everything else byte-for-byte fixed.

enum class PromptTask { vqa, report_rad, report_oph };

/// Question answering over retrieved contents ({text_doc}) and reference
/// reports ({mm_doc}); instructs the model to answer with the option letter.
std::string render_vqa_prompt(const std::string& question_text,
                              const std::string& text_doc, const std::string& mm_doc);

/// Report generation over the same two context sections; the closing
/// instruction differs between radiology and ophthalmology.
std::string render_report_prompt(const std::string& text_doc, const std::string& mm_doc,
                                 PromptTask task);

/// Query exploration: asks for 6 ';'-separated queries per corpus.
std::string render_exploration_prompt(const std::string& question_text);

/// Support judging: asks for a final <answer>yes/no</answer> verdict on
/// whether the documents support the gold answer.
std::string render_judge_prompt(const std::string& question_text, const std::string& gold,
                                const std::string& documents);

/// Query generation: one query per corpus tag, empty tags allowed.
std::string render_query_gen_prompt(const std::string& question_text);

}  // namespace medrag
