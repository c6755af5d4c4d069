#include <string>

#include "haystackcraft/error.hpp"
#include "haystackcraft/haystack.hpp"

namespace hc {

namespace {

constexpr std::string_view kAnswerFormat =
    "Format your response as follows: \"The correct answer is (insert answer here)\".";
constexpr std::string_view kSummaryFormat =
    "Summary: (Summarize what you found in the articles that relates to the question, including any partial "
    "answers, relevant context, or gaps in information.)";
constexpr std::string_view kRefinedFormat =
    "Refined Question: (Copy the original question or replace it with a more specific question based on your "
    "findings.)";

std::string join_analyses(std::span<const std::string> analyses) {
    if (analyses.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < analyses.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += analyses[i];
    }
    return out;
}

}  // namespace

std::string_view template_name(PromptTemplate t) {
    switch (t) {
        case PromptTemplate::Static: return "static";
        case PromptTemplate::DynamicIntermediate: return "dynamic-intermediate";
        case PromptTemplate::DynamicFinal: return "dynamic-final";
        case PromptTemplate::Variable: return "variable";
    }
    return "static";
}

std::string render_haystack(std::span<const RenderedMember> members) {
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "Title: ";
        out += members[i].title;
        out += '\n';
        out += members[i].text;
    }
    return out;
}

std::string render_prompt(std::span<const RenderedMember> members, std::string_view question, PromptTemplate tmpl,
                          std::span<const std::string> analyses) {
    const std::string haystack = render_haystack(members);
    std::string p;
    if (tmpl == PromptTemplate::DynamicFinal && analyses.empty()) tmpl = PromptTemplate::Static;

    switch (tmpl) {
        case PromptTemplate::Static:
            p += "Read the following articles and answer the question below.\n\n";
            p += haystack;
            p += "\n\nWhat is the correct answer to this question: ";
            p += question;
            p += "\n\n";
            p += kAnswerFormat;
            break;
        case PromptTemplate::DynamicIntermediate:
            p += "Read your previous analyses and the following articles. Analyze the question below.\n\n";
            p += "Previous Analyses: " + join_analyses(analyses) + "\n\n";
            p += "Articles: " + haystack + "\n\n";
            p += "Question: ";
            p += question;
            p += "\n\nBased on your previous analyses and the potentially new articles provided, summarize your "
                 "findings related to the question and refine the question.\n\n";
            p += "Format your response as follows:\n\n";
            p += kSummaryFormat;
            p += "\n\n";
            p += kRefinedFormat;
            break;
        case PromptTemplate::DynamicFinal:
            p += "Read your previous analyses and the following articles, and answer the question below.\n\n";
            p += "Previous Analyses: " + join_analyses(analyses) + "\n\n";
            p += "Articles: " + haystack + "\n\n";
            p += "What is the correct answer to this question: ";
            p += question;
            p += "\n\n";
            p += kAnswerFormat;
            break;
        case PromptTemplate::Variable:
            p += "Read your previous analyses and the following articles. Analyze the question below.\n\n";
            p += "Previous Analyses: " + join_analyses(analyses) + "\n\n";
            p += "Articles: " + haystack + "\n\n";
            p += "Question: ";
            p += question;
            p += "\n\nBased on your previous analyses and the potentially new articles provided, decide if you are "
                 "confident in answering the question or if you need additional information.\n\n";
            p += "If you have complete information to fully answer the question, format your response as follows: "
                 "\"The correct answer is (insert answer here)\".\n\n";
            p += "If you need more information, format your response as follows:\n";
            p += kSummaryFormat;
            p += "\n\n";
            p += kRefinedFormat;
            break;
    }
    return p;
}

std::string render_prompt(const Haystack& haystack, std::span<const std::size_t> order, const Corpus& corpus,
                          std::string_view question, PromptTemplate tmpl, std::span<const std::string> analyses) {
    std::vector<RenderedMember> members;
    members.reserve(order.size());
    for (auto i : order) {
        const auto& m = haystack.members.at(i);
        members.push_back({corpus.at(m.doc_id).title, m.text});
    }
    return render_prompt(members, question, tmpl, analyses);
}

}  // namespace hc
