"""Writes fixtures/labeled72.csv: 72 synthesized policy statements whose label
counts reproduce the published marginals. Each row notes the pattern it targets.
"""
import csv
import sys

KEYS = ["learning_use", "assignment_use", "assessment_use", "research_use",
        "citation", "validation", "info_release", "authority"]
ABSENT = {"validation": "NotAddressed", "info_release": "NotAddressed"}

A, NA, R, NR, ADD, INS = "Allowed", "NotAllowed", "Required", "NotRequired", "Addressed", "Instructor"

ROWS = [
    ("Students may use generative AI tools for learning, but not for assignments and assessments. "
     "Please contact the instructor with any questions.",
     dict(learning_use=A, assignment_use=NA, assessment_use=NA, authority=INS), "mixed use; instructor contact"),
    ("The use of generative AI tools to complete an assignment or exam is prohibited unless students have a "
     "written statement from the course instructor granting permission.",
     dict(assignment_use=NA, assessment_use=NA, authority=INS), "prohibition with instructor exception"),
    ("It is imperative that all AI-generated content be reviewed carefully for correctness before submission "
     "or publication. It is the user's responsibility to verify everything.",
     dict(validation=ADD), "verification duty"),
    ("Generative AI may not be used as a study aid or tutor in this course.",
     dict(learning_use=NA), "learning prohibition"),
    ("Use of generative AI is not permitted for assignments.", dict(assignment_use=NA), "assignment prohibition"),
    ("AI writing tools are prohibited on homework and problem sets in this class.",
     dict(assignment_use=NA), "assignment prohibition"),
    ("Students must not submit AI-generated text as their own work on any essay.",
     dict(assignment_use=NA), "assignment prohibition"),
    ("You may use AI tools when drafting homework, provided you cite the tool and the prompt you used.",
     dict(assignment_use=A, citation=R), "assignment permission with citation"),
    ("Generative AI is allowed on assignments in this course as long as its use is acknowledged in a footnote.",
     dict(assignment_use=A, citation=R), "assignment permission with acknowledgement"),
    ("Students are encouraged to use ChatGPT for coding assignments; your instructor will explain expectations "
     "in the syllabus.",
     dict(assignment_use=A, authority=INS), "assignment encouragement; instructor"),
    ("AI assistance is permitted for essays, but you are responsible for verifying the accuracy of every claim.",
     dict(assignment_use=A, validation=ADD), "assignment permission; verification"),
    ("You can use generative AI on lab reports, and you do not need to cite it when it only fixes grammar.",
     dict(assignment_use=A, citation=NR), "assignment permission; citation waived"),
    ("Generative AI may be used for project work. Do not upload classmates' personal information into these "
     "tools.",
     dict(assignment_use=A, info_release=ADD), "assignment permission; information caution"),
    ("Researchers may use generative AI in their research provided its use is disclosed in the methods section.",
     dict(research_use=A, citation=R), "research permission with disclosure"),
    ("Graduate students are permitted to use AI tools for thesis research, but any generated text must be cited.",
     dict(research_use=A, citation=R), "research permission with citation"),
    ("Generative AI tools may support research activities such as summarizing literature; always check outputs "
     "for hallucinated references.",
     dict(research_use=A, validation=ADD), "research permission; verification"),
    ("Generative AI must not be used to write or review grant proposals or research manuscripts.",
     dict(research_use=NA), "research prohibition"),
    ("The use of AI tools in dissertation research is prohibited.", dict(research_use=NA), "research prohibition"),
    ("Do not use generative AI for research involving human subjects data; uploading identifiable data violates "
     "privacy rules.",
     dict(research_use=NA, info_release=ADD), "research prohibition; information caution"),
    ("Any use of generative AI must be cited following the course citation guide.", dict(citation=R), "citation"),
    ("Students must acknowledge any AI-generated content they include in their work.", dict(citation=R), "citation"),
    ("Cite ChatGPT or any other AI tool whenever you quote or paraphrase its output.", dict(citation=R), "citation"),
    ("Include an appendix that discloses the prompts you used and the responses you received.",
     dict(citation=R), "disclosure"),
    ("Work that incorporates AI output without attribution will be treated as plagiarism.",
     dict(citation=R), "attribution"),
    ("Disclose the name and version of any AI tool you used at the end of each submission.",
     dict(citation=R), "disclosure"),
    ("AI-generated material used in your work requires a citation in APA format.", dict(citation=R), "citation"),
    ("If you use generative AI, attribute it clearly, just as you would any other source.",
     dict(citation=R), "attribution"),
    ("Properly cite any content produced by generative AI tools.", dict(citation=R), "citation"),
    ("Students are expected to acknowledge AI assistance in a brief statement attached to their work.",
     dict(citation=R), "acknowledgement"),
    ("Papers that use AI tools must disclose that use in a footnote and cite the tool.",
     dict(citation=R), "disclosure and citation"),
    ("Any generated text or images must be attributed to the AI tool that produced them.",
     dict(citation=R), "attribution"),
    ("Quotations from a chatbot should be cited like any other source.", dict(citation=R), "citation"),
    ("Failing to acknowledge the use of AI tools will be treated as academic dishonesty.",
     dict(citation=R), "acknowledgement"),
    ("Cite the AI model, the date, and the prompt for every use of generative output.",
     dict(citation=R), "citation"),
    ("Citation is not required when AI tools are used only for spelling and grammar checks.",
     dict(citation=NR), "citation waived"),
    ("AI tools can produce inaccurate or fabricated information, so check every fact before relying on it.",
     dict(validation=ADD), "verification"),
    ("Students are responsible for verifying the accuracy of any AI-generated content they submit.",
     dict(validation=ADD), "verification"),
    ("Generated output may include copyrighted material; review it carefully before use.",
     dict(validation=ADD), "copyright review"),
    ("Chatbots sometimes hallucinate sources, so confirm that every reference actually exists.",
     dict(validation=ADD), "hallucination check"),
    ("You remain accountable for errors in AI output and should fact-check it thoroughly.",
     dict(validation=ADD), "fact checking"),
    ("Verify all AI-generated code and text for correctness and potential copyright issues.",
     dict(validation=ADD), "verification and copyright"),
    ("Do not enter confidential or personal information into generative AI tools.",
     dict(info_release=ADD), "information caution"),
    ("Never upload student records or other data protected by FERPA to a public chatbot.",
     dict(info_release=ADD), "information caution"),
    ("Sensitive institutional data must not be shared with third-party AI services.",
     dict(info_release=ADD), "information caution"),
    ("Prompts you submit may be stored by the vendor, so avoid including private details.",
     dict(info_release=ADD), "information caution"),
    ("Protect your privacy: assume anything typed into an AI tool could become public.",
     dict(info_release=ADD), "information caution"),
    ("Do not paste proprietary or unpublished data into AI systems.", dict(info_release=ADD), "information caution"),
    ("Health information and other identifiable data should never be entered into these tools.",
     dict(info_release=ADD), "information caution"),
    ("Keep passwords, grades, and personal identifiers out of any AI prompt.",
     dict(info_release=ADD), "information caution"),
    ("Information shared with AI platforms may be used to train future models; share nothing confidential.",
     dict(info_release=ADD), "information caution"),
    ("Avoid sharing student grades or other private academic data with AI chatbots.",
     dict(info_release=ADD), "information caution"),
    ("Each instructor decides whether generative AI may be used in their course.",
     dict(authority=INS), "instructor authority"),
    ("Students should consult their instructor before using any AI tools.", dict(authority=INS), "instructor authority"),
    ("Follow the guidance in your course syllabus, which your instructor sets for AI use.",
     dict(authority=INS), "instructor authority"),
    ("Course instructors determine acceptable uses of generative AI.", dict(authority=INS), "instructor authority"),
    ("Ask your professor if you are unsure whether a tool is permitted.", dict(authority=INS), "instructor authority"),
    ("The instructor of record has final say on how AI tools are used in class.",
     dict(authority=INS), "instructor authority"),
    ("Unless your instructor states otherwise, AI tools are not permitted.", dict(authority=INS), "instructor authority"),
    ("Faculty members set their own expectations for AI use in each course.",
     dict(authority=INS), "instructor authority"),
    ("Permission to use AI must come in writing from the course instructor.",
     dict(authority=INS), "instructor authority"),
    ("Instructors are encouraged to state their AI policy clearly on the first day of class.",
     dict(authority=INS), "instructor authority"),
    ("When in doubt, talk with your instructor about appropriate use of AI.",
     dict(authority=INS), "instructor authority"),
    ("The use of generative AI without faculty permission will be considered a violation of the honor code.",
     dict(authority=INS), "instructor authority"),
    ("Your instructor will explain which AI tools are acceptable for this course.",
     dict(authority=INS), "instructor authority"),
    ("Individual instructors may allow or restrict generative AI on a course-by-course basis.",
     dict(authority=INS), "instructor authority"),
    ("Each course syllabus will specify, at the instructor's discretion, how AI may be used.",
     dict(authority=INS), "instructor authority"),
    ("Students who use AI in ways not approved by the instructor will be referred for review.",
     dict(authority=INS), "instructor authority"),
    ("This guidance will be revised as generative AI technology evolves.", {}, "no category"),
    ("Generative AI refers to tools such as ChatGPT, Gemini, and Copilot that create text, images, or code.",
     {}, "no category"),
    ("Workshops on generative AI are offered throughout the term.", {}, "no category"),
    ("The committee will publish updated resources each semester.", {}, "no category"),
    ("Questions about this guidance can be sent to the teaching and learning center.", {}, "no category"),
]


def main(out):
    assert len(ROWS) == 72, len(ROWS)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["text"] + KEYS + ["annotator_note"])
        for text, labels, note in ROWS:
            w.writerow([text] + [labels.get(k, ABSENT.get(k, "NotMentioned")) for k in KEYS] + [note])


if __name__ == "__main__":
    main(sys.argv[1])
