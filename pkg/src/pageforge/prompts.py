"""Prompt template registry with ``{{placeholder}}`` substitution.

Every agent call renders a named template from this registry; nothing is
inlined at call sites, so the full prompt surface of the system is auditable
in one place.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import PageForgeError

_PLACEHOLDER = re.compile(r"\{\{\s*(\w+)\s*\}\}")


class PromptRenderError(PageForgeError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system: str
    body: str = ""
    placeholders: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        found = []
        for text in (self.system, self.body):
            for m in _PLACEHOLDER.finditer(text):
                if m.group(1) not in found:
                    found.append(m.group(1))
        object.__setattr__(self, "placeholders", tuple(found))

    def render(self, **values: object) -> tuple[str, str]:
        """Return (system, user) text with every placeholder substituted.

        Missing placeholders raise; extra keyword arguments are ignored so a
        caller can pass one context dict to several templates.
        """
        missing = [p for p in self.placeholders if p not in values]
        if missing:
            raise PromptRenderError(
                f"template {self.name!r} missing values for: {', '.join(missing)}"
            )

        def _sub(match: re.Match[str]) -> str:
            return str(values[match.group(1)])

        return _PLACEHOLDER.sub(_sub, self.system), _PLACEHOLDER.sub(_sub, self.body)


# Math-rendering snippet injected into generated pages when the prose
# contains formulas; the html generation template quotes it verbatim.
MATHJAX_SNIPPET = """<script>
 window.MathJax = {
 tex: {
 inlineMath: [['$', '$'], ['\\\\(', '\\\\)']],
 displayMath: [['$$', '$$'], ['\\\\[', '\\\\]']]
 }
 };
</script>
<script src="https://cdn.jsdelivr.net/npm/mathjax@3/es5/tex-mml-chtml.js">
</script>"""


_TEMPLATES = [
    PromptTemplate(
        name="filter_figures",
        system=(
            "You are a helpful academic expert. You need to determine which section "
            "of the paper each image and table in the figures belongs to from given "
            "research paper's contents and figures."
        ),
        body="""Below is the figures with descriptions, paths, width and height in the paper:

<figures>
{{figures}}
</figures>

I have already generated the text-based project page content as follows:

<project_page_content>
{{project_page_content}}
</project_page_content>

The paper content is as follows:

<paper_content>
{{paper_content}}
</paper_content>

Tasks:

1. Determine which section of the article each image and table in the figures belongs to, and then add a field called original_section to every figure in the original figures, filling it with the determined section. If a figure does not appear in the paper content, then original_section should be set to null. Your output should be json format.
2. Extract figure and table tags from figure or table captions. Key of these tags is tag.
3. Remove the extracted tag from caption of each figure.

Output Format:

```json
<Your output>
```
""",
    ),
    PromptTemplate(
        name="section_generation",
        system=(
            "You are an expert content planner specializing in creating engaging "
            "project pages for research papers. Your role is to analyze research "
            "content and plan an effective structure that communicates the research "
            "clearly and professionally.\n\n"
            "You will be given:\n"
            "1. Research Paper in markdown format.\n"
            "2. List of images extracted from the paper.\n"
            "3. List of tables extracted from the paper.\n\n"
            "Your goal is to create a section plan that organizes the research into "
            "an effective project page structure."
        ),
        body="""Please analyze the paper content and identify the key sections that should be included in the project page. For each section, provide a concise description of what should be included. First, determine the paper type:

- For methodology research papers: Focus on method description, experimental results, and research methodology.
- For benchmark papers: Highlight task definitions, dataset construction, and evaluation outcomes.
- For survey/review papers: Emphasize field significance, key developmental milestones, critical theories/techniques, current challenges, and emerging trends.

Note that the specific section names should be derived from the paper's content. Related sections can be combined to avoid fragmentation. Limit the total number of sections to maintain clarity.

You must include some section that describe the methodology and experiments.

Do not include acknowledgements or references sections. Do not include related work and experiment setting sections.

The number of sections you design must not exceed five.

Return the result as a flat JSON object with section names as keys and descriptions as values, without nested structures. You MUST use Markdown code block syntax with the json language specifier.

Paper Content:

{{paper_content}}

Output Format:

```json
<Your generated section json content>
```
""",
    ),
    PromptTemplate(
        name="text_content_generation",
        system=(
            "You are a helpful academic expert and web developer, who is specialized "
            "in generating a text-based paper project page, from given contents."
        ),
        body="""You will be given the research paper's paper markdown content, figures, and a section plan that describe what content should be included in each section of the project page.

Your task is to fill in the actual content for each section based on the requirements outlined in the section plan and the content of the research paper.

In the project page, you should introduce it from the author's perspective rather than from a third-party viewpoint. This content will ultimately be displayed on the project page. The content you generated must include all key components of the paper.

Below is the image and table figures with descriptions and paths in the paper:

<figures>
{{figures}}
</figures>

Below is the content of the paper:

<paper_content>
{{paper_content}}
</paper_content>

Section Plan:

{{format_instructions}}

If figures can effectively convey the poster content, simplify the related text to avoid redundancy. Include essential mathematical formulas where they enhance understanding.

Don't leave any important content in the research paper. If the paper content has a conclusion section, this section should not contain any figures.

Do not include any tag of figure or table in the text.

Your output must be in JSON format, and the section names in your output must exactly match those in the section plan.

Output Format:

```json
<Your output>
```

Ensure all sections are precise, concise.
""",
    ),
    PromptTemplate(
        name="full_content_generation",
        system=(
            "You are a helpful academic expert and web developer, who is specialized "
            "in generating a paper project page, from given research paper's contents "
            "and figures."
        ),
        body="""Below is the figures with descriptions, paths, width and height in the paper:

<figures>
{{figures}}
</figures>

I have already generated the text-based project page content as follows:

<project_page_content>
{{project_page_content}}
</project_page_content>

The paper content is as follows:

<paper_content>
{{paper_content}}
</paper_content>

Task Requirements:

Your task is inserting figures into the project page content using figure index notation as:

![figure_description][figure_path][width=figure_width, height=figure_height](figure_index)

For example:

![Overview]["assets/paper-picture-8.png"][width=1068, height=128](8)

Specific Requirements:

1. The figure_index MUST be an integer starting from 1, and no other text should be used in the figure_index position.
2. Each figure should be used at most once, with precise and accurate placement.
3. Prioritize pictures and tables based on their relevance and importance to the content.
4. The teaser figure that appears early in the paper must be included in the content.
5. Don't leave any important figure in the research paper.
6. If a chapter has multiple tables, only the one most relevant to the chapter should be included.
7. Your output must be in JSON format, and the section names in your output must exactly match those in the project_page_content.
8. Please ensure that the images you insert are closely related to the context and align well with the content of the section.

Output Format:

```json
<Your output>
```
""",
    ),
    PromptTemplate(
        name="html_generation",
        system=(
            "You are an expert web developer specializing in creating professional "
            "project pages for research papers. You have extensive experience in "
            "HTML5, CSS3, responsive design, and academic content presentation. Your "
            "goal is to create a complete, production-ready HTML project page that is "
            "visually appealing and professional."
        ),
        body="""Instructions:

Generate a complete, production-ready HTML project page based on the provided project page content and html template.

Project Page Content:

{{ generated_content }}

HTML Template:

{{ html_template }}

Requirements:

1. The HTML files you generate should follow the format and style of the reference HTML template as closely as possible, but you can replace the content in the reference HTML template.
2. The content of your project page should be filled completely with the project page content, without any omissions.
3. All content sections in Project Page Content should be properly formatted in your html file.
4. Images and tables in Project Page Content should be integrated into your html using the correct image path or table path.
5. You should make sure that paths of css files included in the html file should not be changed.
6. If there is a formula in the generated content, please add the relevant js code such as:

"""
        + MATHJAX_SNIPPET
        + """

7. For images and tables, only the caption needs to be retained and the tag before the caption needs to be deleted (e.g. Figure 1., Table 2.).
8. Do not place the table in a small container. If the table is large, place it in a larger container.
9. The image (not table) should be placed in the container to limit its size.
10. Formulas should not be placed in separate paragraphs.
11. Be careful not to let the image overflow the screen, the screen width is generally 1280. You can add a container that is the same width as the screen to limit.

Layout Specification:

- For example, if there are two images in two columns whose aspect ratios are 1.2 and 2 respectively, the flex grow of two columns should be 1.2 and 2 respectively, to make the columns have the same height.
- Calculate the size of each image based on column width and aspect ratios. Add comment <!-- width = display_width, height = display_height --> before each image.
- Rearrange the structure and order of sections, texts and images to make the height of each column in the same group approximately the same.
- For example, if there are too many images in one section that make the height of the column too large, group the images into columns.
- The display width of each image should not be too large or too small compared to its original width.
- In each section, if an image or a table is placed in a single column layout, it should be horizontally centered within that column or content block (not the full page). Use CSS techniques such as display: block; margin: auto; to achieve proper visual centering.
- There should be a certain amount of spacing between adjacent images.
- All sections on the entire project page must be in a single column and span the full width of the page.
- Formulas do not need to be opened in a separate paragraph such as section-text block (such as <p class="section-text" style="text-align: center;">).

Output Format:

```html
<html_content>
```
""",
    ),
    PromptTemplate(
        name="full_content_review",
        system=(
            "You are an expert reviewer for scientific project pages. Your task is to "
            "carefully review the generated content by comparing it with the original "
            "paper content and figures.\n\n"
            "You will be given three inputs:\n"
            "1. paper_content: the original scientific content of the paper.\n"
            "2. figures: the list of figures (including captions, tag, intended "
            "placement, and meaning).\n"
            "3. generated_content: the project page content automatically generated "
            "by another agent."
        ),
        body="""You cannot violate these basic rules below for the project page when generating suggestions.

1. Number of tables in the whole page must be less than or equal to 3.
2. Any figure or table can just appear once in the content.
3. Include at least one table in experiment and ablation section if these two are included in generated sections.
4. Include at least one image in visualization section if it is included in generated sections.

Remember that you should just restrict number of tables under 4, rather than restrict the total number of visual elements in the whole content.

You can know if a visual element is a table by its tag.

You should first get the number of tables and number of figures respectively in the content and then tell if the number of tables is more than 3.

Your review must focus on the following dimensions:

1. Figure Placement and Usage

- Verify whether figures are inserted in the correct sections according to their meaning in the paper.
- For each section, you should check whether the text content and captions of figures and tables it includes is tightly related.
- Check if two figures convey similar idea. If it is, you should remain the more important figure.

2. Relation between figures and text

- Check if the core idea that a figure shows is mentioned in text of its section.
- If the correlation between them is weak, please suggest to remove the figure or move it to other section.

3. Number of tables

- You should tell whether the number of tables is more than 2. If it is, you should choose 2 most important table to remain.
- Do not restrict the number of figures.

Below is the figures with captions, paths, width and height in the paper:

<figures>
{{figures}}
</figures>

Below is the tables with captions, paths, width and height in the paper:

<tables>
{{tables}}
</tables>

The paper content is as follows:

<paper_content>
{{paper_content}}
</paper_content>

The generated project page content is as follows:

<project_page_content>
{{generated_content}}
</project_page_content>

Requirements:

1. Do not suggest adding or deleting entire sections.
2. The generated project page content should present the more important parts of the paper content in a concise manner, so your review should not require including too many unimportant details.
3. Remember that the original section of a image is not necessary to be same as the section it belongs to in the page. Do not correlate the two sections together.
4. Do not give suggestions of including figure Captions, because they will be included during the generation of html, not full content.
5. Do not give suggestion to change any text content in any section, you can just suggest to add or delete or move figures and tables.
6. Tables and Figures from Ablation section in the paper content should belong to Experiment section in the generated content if Ablation is not included in generated sections.

Output Format:

You must return your review in strict JSON format with the following fields:

```json
{
  "weakness": [
    "weakness_1",
    "weakness_2"
  ],
  "strength": [
    "strength_1",
    "strength_2"
  ],
  "suggestion": [
    "suggestion_1",
    "suggestion_2"
  ]
}
```
""",
    ),
    PromptTemplate(
        name="full_content_revise",
        system=(
            "Please revise the previously generated project page content according "
            "to the review below:"
        ),
        body="""<review_content>
{{review_content}}
</review_content>

Instructions:

1. Carefully read the weakness, strength, and suggestion fields in the review JSON.
2. Improve the previously generated content by:
   - Fixing weaknesses
   - Preserving strengths
   - Applying suggestions directly and concretely
3. Ensure the revised content is:
   - Accurate (aligned with the original intent of the paper and figures).
   - Clear and fluent (scientifically precise, grammatically correct, and concise).
   - Well-structured (logical flow, correct figure placement).
4. Please do not add or remove any sections.
5. Do not change the name of any section in the page content.
6. Do not include two identical figures in the page content.
7. Do not change any text content.

The previously generated project page content is as follows:

<project_page_content>
{{generated_content}}
</project_page_content>

Output Format:

```json
<Your output>
```
""",
    ),
    PromptTemplate(
        name="html_review",
        system=(
            "You are a professional reviewer specializing in images and figures on "
            "research project pages. Your task is to inspect all images individually "
            "and meticulously, considering only width, vertical spacing, and internal "
            "text size. Return a summary report that aggregates feedback across all "
            "images."
        ),
        body="""Evaluation Criteria:

1. Width of images

- Judge strictly whether each image is too wide, too narrow, or within the ideal visual range (approximately 70-90% of the main text block).
- Mark as a weakness if:
  - The image exceeds the main text block width.
  - The image is clearly smaller than 65% of the text block width.
- Allowed adjustment: specify a percentage of the original image width (e.g., "shrink to 90% of original width").
- Special rule for containers:
  - Only if an image clearly overflows outside the viewport/screen (not just wider than text block), recommend adding a container restriction.
  - In all other cases, simply suggest proportional resizing by percentage.

2. Vertical spacing

- Check if the spacing above and below each image is visually balanced.
- Mark as a weakness if one side is noticeably larger than the other.
- Allowed adjustment: specify exact pixel values (e.g., "set both top and bottom margin to 24px").
- Spacing must be consistent with surrounding blocks to maintain overall page rhythm.

3. Text inside images

- Judge whether text inside the image is disproportionately larger than body text (~12-14px).
- Font inside images cannot be changed directly.
- Allowed adjustment: suggest resizing the whole image by a specific percentage of its original width (e.g., "shrink to 80% of original width") to bring internal text visually closer to body text size.

4. Strictness Rules

- Only consider the three aspects above: width, vertical spacing, internal text.
- Skip tables when checking internal text size.
- Provide precise, actionable suggestions using percentages for width adjustments and pixels for margins.
- Be conservative: report all issues, even if minor, with clear reference to the affected image.
- Container restriction is suggested only if the image overflows outside the viewport.
- Formulas should not be placed in separate paragraphs.

Output Format:

Return a single JSON object with three arrays that summarize all images:

- "weaknesses": list all weaknesses across all images, each item must indicate the image it comes from and the specific problem.
- "strengths": list all positive aspects across all images, each item must indicate the image it comes from.
- "suggestions": list all actionable suggestions for all images, using specific percentages for width adjustments and pixels for vertical spacing.
- Only include "add container restriction" if the image actually overflows the viewport.

```json
{
  "weaknesses": [
    "weakness_1",
    "weakness_2"
  ],
  "strengths": [
    "strength_1",
    "strength_2"
  ],
  "suggestions": [
    "suggestion_1",
    "suggestion_2"
  ]
}
```
""",
    ),
    PromptTemplate(
        name="html_revise",
        system=(
            "You are an expert web developer specializing in creating professional "
            "project pages for research papers. You have extensive experience in "
            "HTML5, CSS3, responsive design, and academic content presentation. Your "
            "goal is to produce a complete, production-ready HTML project page that "
            "is visually appealing, professional, and adheres to specified "
            "constraints."
        ),
        body="""Instructions:

Generate a refined, production-ready HTML project page based on the existing HTML and the provided suggestions.

Existing HTML:

{{ existing_html }}

Suggestions:

{{ suggestions }}

Requirements:

1. Apply all the suggestions carefully to the existing HTML without omitting any improvements.
2. Preserve the original formatting, style, and constraints from the existing HTML, unless explicitly adjusted by the suggestions.
3. All content sections must remain properly formatted and intact; do not remove or lose any original content.
4. Images and tables should retain correct paths and aspect ratios; apply size adjustments or centering only if suggested.
5. Maintain responsive design, single-column full-width layout, and professional visual presentation.
6. Ensure proper spacing, alignment, symmetry, and column height balance as specified in the previous layout rules.
7. Comment <!-- width = display_width, height = display_height --> before each image whose size is adjusted according to column width and aspect ratio.
8. Center images or tables horizontally within their column or content block where applicable.
9. All other previous layout constraints and formatting rules must be respected.
10. Modify the image size according to the suggestions, making sure it is centered and there should be a certain amount of space between the images.

Output Format:

```html
<html_content>
```
""",
    ),
    PromptTemplate(
        name="vlm_aesthetics_judge",
        system=(
            "You are an extremely strict visual aesthetics reviewer. Focus solely on "
            "the overall aesthetic feel of the page or project presentation, "
            "including color scheme, style consistency, visual hierarchy, text-image "
            "coordination, and overall visual impression. Do not consider the "
            "accuracy of formulas or specific content of text or images, only "
            "evaluate aesthetics and visual feel. Do not easily give high scores "
            "unless the overall aesthetics reach an extremely high level."
        ),
        body="""Scoring Description:
Five-point scale:
1 point:
- The overall color scheme of the page or content is chaotic or conflicting, resulting in a very poor visual experience.
- The style is inconsistent, with no sense of hierarchy among elements, and the overall impression is cluttered.
- Poor coordination between images, text, or charts, causing visual fatigue.
2 points:
- The color scheme or style shows obvious inconsistencies, with some areas having weak aesthetic appeal.
- The hierarchy of elements is slightly chaotic, with unclear visual guidance.
- Text-image coordination is average, and the overall impression is slightly cluttered.
3 points:
- The color scheme is generally reasonable but has minor conflicts or imbalances.
- The style is relatively unified, but some elements are slightly uncoordinated.
- Text-image coordination is good, but there is still room for improvement in overall aesthetics.
4 points:
- The color scheme is comfortable, with consistent style and good overall visual aesthetics.
- The hierarchy of elements is clear, with reasonable visual guidance and high text-image coordination.
- The overall impression is comfortable, with strong visual appeal.
5 points:
- Rarely used; reserved for publication-level visual aesthetics.
- Color, style, hierarchy, and layout are perfectly unified, with harmonious and beautiful overall visuals.
- Text-image coordination is exceptional, with natural visual rhythm, an excellent impression, and no flaws.

- Example Output:
{
  "reason": "xx",
  "score": int
}

Please provide scores strictly and conservatively.
""",
    ),
    # Note: the 3-5 point rubric text of the element and layout judges reads
    # as if the two were swapped (the element judge's upper rubric describes
    # layout concerns and vice versa). The templates are registered exactly as
    # published; do not "fix" them.
    PromptTemplate(
        name="vlm_element_judge",
        system=(
            "You are an extremely strict visual elements reviewer. Focus solely on "
            "the presentation of formulas and images, as well as the relevance of "
            "images to paragraph content. Do not consider webpage layout, paragraph "
            "formatting, or overall design. Do not easily give high scores unless "
            "the visual elements fully meet the highest standards."
        ),
        body="""Scoring Description:
Five-point scale:
1 point:
- Formulas are incompletely displayed or entirely missing.
- Images are almost irrelevant to paragraph content or entirely missing.
- Colors are hard to distinguish, affecting comprehension.
2 points:
- Some formulas or images are displayed correctly, but others are missing or incorrect.
- Image labels or captions are unclear, with weak relevance to text.
- Colors or clarity have some issues, making comprehension difficult.
3 points:
- Most areas have a reasonable layout, but there are occasional issues with uneven white space or slightly oversized/undersized images.
- The page is generally visually balanced but has slight inconsistencies.
- Minor impact on reading or comprehension, but overall acceptable.
4 points:
- The page layout is good, with well-proportioned visual elements.
- White space is reasonable, and image sizes are appropriate.
- The overall visual experience is comfortable, with smooth information delivery.
5 points:
- Rarely used; reserved for publication-level page layout.
- White space and image sizes are perfectly balanced, with a natural visual rhythm.
- The page is visually harmonious, offering an excellent reading experience with no distractions.

- Example Output:
{
  "reason": "xx",
  "score": int
}

Please provide scores strictly and conservatively.
""",
    ),
    PromptTemplate(
        name="vlm_layout_judge",
        system=(
            "You are an extremely strict webpage layout reviewer. Focus solely on "
            "the visual layout and typesetting experience of the page, without "
            "considering the clarity of formulas, images, or their relevance to "
            "text. Pay attention to issues such as white space, image size, and "
            "visual balance, particularly noting whether large areas of white space "
            "or oversized images disrupt the visual effect. Do not easily give high "
            "scores unless the layout is highly reasonable."
        ),
        body="""Scoring Description:
Five-point scale:
1 point:
- The page layout is extremely chaotic or cluttered.
- Large areas of white space or oversized images disrupt the overall visual effect.
- The page is visually unbalanced, resulting in a poor reading experience.
2 points:
- Some areas have a reasonable layout, but there are still noticeable large areas of white space or oversized images.
- The page lacks visual balance, with a mediocre overall impression.
- Some element arrangements may hinder information acquisition.
3 points:
- Most formulas and images are displayed correctly, but there are noticeable issues with clarity, style, or annotations.
- Some images have average relevance to paragraph content.
- Minor issues with labels or colors, but they do not significantly affect comprehension.
4 points:
- Formulas are fully displayed, and images are clear and highly relevant to paragraph content.
- Labels, legends, and colors are reasonable and aid comprehension.
- Style is relatively consistent, with overall good visual presentation.
5 points:
- Rarely used; reserved for publication-level visual presentation.
- Formulas are perfectly displayed, and images are clear and highly relevant to text.
- Labels and legends are flawless, with unified colors and style, and impeccable visual presentation.

- Example Output:
{
  "reason": "xx",
  "score": int
}

Please provide scores strictly and conservatively.
""",
    ),
    # -- plumbing templates (no published counterpart) ----------------------
    PromptTemplate(
        name="asset_library_refine",
        system=(
            "You are a helpful academic expert. You condense research paper sections "
            "into short, faithful summaries for a project page content library."
        ),
        body="""Below are the sections of a research paper as a JSON object mapping each section heading to its full text:

<sections>
{{sections}}
</sections>

Write a paragraph-level summary for every section. Return a flat JSON object that maps each section heading, unchanged and in the same order, to its summary. Do not add, drop, or rename headings.

Output Format:

```json
<Your output>
```
""",
    ),
    PromptTemplate(
        name="content_feedback",
        system=(
            "You are a helpful academic expert maintaining the content of a research "
            "project page. Apply the author's instruction to the page content. You "
            "may delete, merge, or reorder sections when asked, but never invent "
            "facts that are not in the existing content."
        ),
        body="""The current project page content is the following JSON object (section name -> section body, where figure placements use the inline figure index notation):

<project_page_content>
{{content}}
</project_page_content>

The author's instruction:

<feedback>
{{feedback}}
</feedback>

Apply the instruction and return the complete updated content in the same JSON shape.

Output Format:

```json
<Your output>
```
""",
    ),
    PromptTemplate(
        name="style_feedback",
        system=(
            "You are an expert web developer maintaining a research project page. "
            "Apply the author's styling instruction to the existing HTML without "
            "removing or losing any original content."
        ),
        body="""Existing HTML:

{{existing_html}}

The author's instruction:

<feedback>
{{feedback}}
</feedback>

Return the complete updated HTML document.

Output Format:

```html
<html_content>
```
""",
    ),
    PromptTemplate(
        name="qa_generation",
        system=(
            "You are a meticulous examiner. You write question-answer pairs that "
            "probe how well a document preserves the information of a research "
            "paper."
        ),
        body="""The paper content is as follows:

<paper_content>
{{paper_content}}
</paper_content>

Generate exactly {{n}} question-answer pairs about this paper: {{n_detail}} detail questions (specific facts, numbers, names) and {{n_understanding}} understanding questions (methods, motivations, conclusions).

Return a JSON array where every element is an object with fields "question", "reference_answer", and "category" ("detail" or "understanding").

Output Format:

```json
<Your output>
```
""",
    ),
    PromptTemplate(
        name="qa_answer",
        system=(
            "You answer questions using only the provided webpage text. If the text "
            "does not contain the answer, reply with the single word: unknown."
        ),
        body="""Webpage text:

<page_text>
{{page_text}}
</page_text>

Question: {{question}}

Answer concisely.
""",
    ),
    PromptTemplate(
        name="qa_grade",
        system=(
            "You are a strict grader. Decide whether a candidate answer is "
            "equivalent to the reference answer for the given question. Reply in "
            "JSON: {\"correct\": true} or {\"correct\": false}."
        ),
        body="""Question: {{question}}

Reference answer: {{reference_answer}}

Candidate answer: {{candidate_answer}}

Output Format:

```json
<Your output>
```
""",
    ),
]

REGISTRY: dict[str, PromptTemplate] = {t.name: t for t in _TEMPLATES}


def get_template(name: str) -> PromptTemplate:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown prompt template: {name!r}") from None


def render(name: str, **values: object) -> tuple[str, str]:
    """Render the named template; returns (system, user) message text."""
    return get_template(name).render(**values)
