#include "medrag/prompts.hpp"

#include <string_view>

namespace medrag {

namespace {

void substitute(std::string& text, std::string_view slot, const std::string& value) {
    const auto pos = text.find(slot);
    if (pos != std::string::npos) text.replace(pos, slot.size(), value);
}

constexpr std::string_view kVqaTemplate =
    "{question_image}\n"
    "\n"
    "Retrieved Contents:\n"
    "{text_doc}\n"
    "\n"
    "Reference Reports:\n"
    "{mm_doc}\n"
    "\n"
    "{question_text}\n"
    "Please answer the question based on the Retrieved Contents. It should be noted that "
    "the diagnostic information in the Reference Reports cannot be directly used as the "
    "basis for diagnosis, but should only be used for reference and comparison.\n"
    "\n"
    "Answer with the option's letter from the given choices directly.";

constexpr std::string_view kReportTemplate =
    "{question_image}\n"
    "\n"
    "Retrieved Contents:\n"
    "{text_doc}\n"
    "\n"
    "Reference Reports:\n"
    "{mm_doc}\n"
    "\n"
    "Please answer the question based on the Retrieved Contents. It should be noted that "
    "the diagnostic information in the Reference Reports cannot be directly used as the "
    "basis for diagnosis, but should only be used for reference and comparison.\n"
    "\n"
    "{task_instruction}";

constexpr std::string_view kRadInstruction =
    "You are a helpful assistant. Please generate a report for the given image, including "
    "both findings and impressions. Return the report in the following format: "
    "Findings: {} Impression: {}.";

constexpr std::string_view kOphInstruction =
    "You are a helpful assistant. Please generate a short report for the given image in "
    "100 words. Please only include the content of the report in your response.";

constexpr std::string_view kCorpusDescription =
    "# Corpus Description\n"
    "research: The corpus provides access to advanced biomedical research, facilitating "
    "access to specialized knowledge and resources.\n"
    "wiki: The corpus provides access to general knowledge across a wide range of topics.\n"
    "book: The corpus provides access to medical knowledge resource including various "
    "educational resources and textbooks.\n"
    "guideline: The corpus provides access to clinical guidelines from leading health "
    "organizations.\n"
    "graph: The corpus provides a structured knowledge graph that connects medical "
    "definitions and related terms.";

constexpr std::string_view kExplorationTemplate =
    "{question_image}\n"
    "\n"
    "# Question (based on the image)\n"
    "{question_text}\n"
    "\n"
    "{corpus_description}\n"
    "\n"
    "# Query Format\n"
    "<research>{query0} ; {query1} ; ... (Use ; to separate the queries)</research>\n"
    "<wiki>{query0} ; {query1} ; ... (Use ; to separate the queries)</wiki>\n"
    "<book>{query0} ; {query1} ; ... (Use ; to separate the queries)</book>\n"
    "<guideline>{query0} ; {query1} ; ... (Use ; to separate the queries)</guideline>\n"
    "<graph>{query_term0} , {query_relation0} ; {query_term1} , {query_relation1} ; ... "
    "(Use ; to separate the queries. Each query should use , to separate the {query_term} "
    "and {query_relation})</graph>\n"
    "\n"
    "To answer the question labeled as # Question, please construct appropriate queries "
    "to get the information you need.\n"
    "1. Each corpus in # Corpus Description must have search queries constructed.\n"
    "2. Please give the search queries following the format in # Query Format. Each corpus "
    "should have 6 queries, separated by ';'.\n"
    "3. The queries generated for each corpus should exhibit diversity and be closely "
    "aligned with the specific information needs and characteristics of that corpus.";

constexpr std::string_view kJudgeTemplate =
    "{question_image}\n"
    "\n"
    "# Question (based on the image)\n"
    "{question_text}\n"
    "\n"
    "# Gold Answer\n"
    "{gold}\n"
    "\n"
    "# Documents\n"
    "{documents}\n"
    "\n"
    "You are a professional medical expert. Please judge whether the information in the "
    "# Documents supports the # Gold Answer as a response to the # Question. Please judge "
    "whether # Documents supports the # Gold Answer in response to the # Question, rather "
    "than evaluating if the # Question's answer is the # Gold Answer. Please first think "
    "step-by-step and then show your judgement using the format <answer>yes/no</answer> "
    "at the end of your response. Please keep your entire response simple and complete, "
    "up to 100 words.";

constexpr std::string_view kQueryGenTemplate =
    "{question_image}\n"
    "\n"
    "# Question (based on the image)\n"
    "{question_text}\n"
    "\n"
    "{corpus_description}\n"
    "\n"
    "# Query Format\n"
    "<research>{query}</research>\n"
    "<wiki>{query}</wiki>\n"
    "<book>{query}</book>\n"
    "<guideline>{query}</guideline>\n"
    "<graph>{query_term} , {query_relation} (Each query should use , to separate the "
    "{query_term} and {query_relation})</graph>\n"
    "\n"
    "To answer the question labeled as # Question, please construct appropriate queries "
    "to get the information you need.\n"
    "1. Please give the search queries following the format in # Query Format. For each "
    "corpus, if you think no information retrieval is needed, simply output an empty tag "
    "for that corpus, for example: <book></book>.\n"
    "2. The queries generated for each corpus should be closely aligned with the specific "
    "information needs and characteristics of that corpus.";

}  // namespace

std::string render_vqa_prompt(const std::string& question_text,
                              const std::string& text_doc, const std::string& mm_doc) {
    std::string out(kVqaTemplate);
    substitute(out, "{text_doc}", text_doc);
    substitute(out, "{mm_doc}", mm_doc);
    substitute(out, "{question_text}", question_text);
    return out;
}

std::string render_report_prompt(const std::string& text_doc, const std::string& mm_doc,
                                 PromptTask task) {
    std::string out(kReportTemplate);
    substitute(out, "{text_doc}", text_doc);
    substitute(out, "{mm_doc}", mm_doc);
    substitute(out, "{task_instruction}",
               std::string(task == PromptTask::report_oph ? kOphInstruction
                                                          : kRadInstruction));
    return out;
}

std::string render_exploration_prompt(const std::string& question_text) {
    std::string out(kExplorationTemplate);
    substitute(out, "{corpus_description}", std::string(kCorpusDescription));
    substitute(out, "{question_text}", question_text);
    return out;
}

std::string render_judge_prompt(const std::string& question_text, const std::string& gold,
                                const std::string& documents) {
    std::string out(kJudgeTemplate);
    substitute(out, "{question_text}", question_text);
    substitute(out, "{gold}", gold);
    substitute(out, "{documents}", documents);
    return out;
}

std::string render_query_gen_prompt(const std::string& question_text) {
    std::string out(kQueryGenTemplate);
    substitute(out, "{corpus_description}", std::string(kCorpusDescription));
    substitute(out, "{question_text}", question_text);
    return out;
}

}  // namespace medrag
