"""Prompt templates used by summarization and MCQ evaluation."""

ASSET_SUMMARY_PROMPT = (
    "You are an AI assistant specialized in summarizing tables and figures for "
    "efficient retrieval. \n\nInstructions:\n\nIdentify Input Type: Explicitly "
    "state whether the input provided is a table or a figure.\nScientific "
    "Abstract: Summarize the contents concisely in the style of a scientific "
    "abstract. Include relevant numeric values and key findings. \nRetrieval "
    "Optimization: Structure your summary clearly, optimizing keywords and "
    "phrasing to enhance retrieval and indexing.\nLength Constraint: Your "
    "summary must strictly adhere to a maximum of 300 words or 250 tokens. Do "
    "not exceed this limit under any circumstances. Any text exceeding will be "
    "just cutoff post generation.\nAvoid Generic Openings: Do not start your "
    "summary with generic phrases such as \"The image provided is,\" \"The "
    "table shows,\" or similar introductory sentences. Instead, immediately "
    "describe the core content.\nPrevent Redundancy: Write succinctly, "
    "avoiding repetition of concepts or data points.\nFinal output: Only "
    "summary text. If no relevant data is present, output ''."
)

MCQ_PROMPT_TEMPLATE = (
    "Generate a JSON with the query_answer, the answer provided behind the "
    "letters: A, B, C, and D. These are the values. Additional information if "
    "provided in the Context below. If the Context is not empty, analyse it "
    "and choose from the letters. MAKE SURE your output is one of the four "
    "values stated. \n"
    "Here is the query: {question}. \n"
    "Here are the choices: {question_string} \n"
    "    Context:\n"
    "{context}"
)
