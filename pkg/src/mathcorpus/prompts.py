"""Prompt templates used by annotation, extraction, and rewriting.

These are versioned assets: tests pin each template's checksum, so any edit
here must be deliberate. ``{TEXT}`` is the document slot.
"""

EXTRACTION_TEMPLATE = """\
You will be presented with a text related to math. I need you to identify all the complex computations in it. For each complex computation, find out the conditions needed for the computation, the LaTeX expression that conducts the computation, and the result of the computation. Then generate a Python code snippet for each computation that demonstrates how the result is reached. Output each computation in the following format:

Conditions Needed:
1. [Condition 1]
2. [Condition 2]
...

Computation Expression:
$[LaTeX Expression]$

Computation Result:
[Computation Result]

Python Code Snippet:
```python
[Python Code]
```

There can be more than one complex computation in the text. Output only the computations that requires calculation. Do not include mathematical statements or definitions as a computation. Make sure each snippet can be executed individually. The text is as follows: {TEXT}

The computations are:
"""

ANNOTATION_TEMPLATE = """\
You will be provided with a block of text. I need you to classify the text into one of the following types:

1. The text describes a mathematical problem and its solution.

2. The text explains a mathematical concept or mathematical theory.

3. The text explains a scientific or engineering concept that requires mathematical knowledge.

4. The text describes a programming problem and its solution.

5. The text explains a concept or theory related to programming.

6. The text explains the usage of a programming language or software tool.

7. The text does not belong to any of the types above.

Here's the text I've provided. Kindly analyze and classify it into type 1, 2, 3, 4, 5, 6 or 7. Put your choice behind "The type is:". Please do not generate any unrelated additional comments! The type number must match the type description. Here's one of the texts that needs to be classified: {TEXT} The type is:
"""

REWRITE_TEMPLATE = """\
You will be presented with a text related to math. I need you to carefully read through the text. If you find any incorrect statments, erroneous computation steps, spelling mistakes, grammatical errors, or formatting issues, adjust them so that the error is corrected. Rewrite the text to make it more accurate and easier to understand. You should only output an adjusted version of the given text. Also, do not change the original language. Please do not generate any unrelated additional comments! The text is as follows: {TEXT}

You should output:
"""

TEMPLATES = {
    "extraction": EXTRACTION_TEMPLATE,
    "annotation": ANNOTATION_TEMPLATE,
    "rewrite": REWRITE_TEMPLATE,
}
